use criterion::{black_box, criterion_group, criterion_main, Criterion};

use sth_core::{
    krug_meakin_extrapolate, rational_extrapolate, run_ensemble, CellConfig, DeltaWindow,
    EnsembleSpec, UpdateMode, UtilizationPoint,
};

fn bench_ensemble(c: &mut Criterion) {
    c.bench_function("ensemble_L256_t512_n8", |b| {
        let spec = EnsembleSpec {
            cell: CellConfig {
                mode: UpdateMode::Conservative,
                n_pes: 256,
                sites_per_pe: 1,
                window: DeltaWindow::Finite(10.0),
                steps: 512,
                burn_in: 256,
                record_every: 4,
                randomized_spread: 0.0,
            },
            n_trials: 8,
            seed: 3,
            instrument: true,
        };
        b.iter(|| black_box(run_ensemble(&spec).unwrap()))
    });
}

fn bench_extrapolation(c: &mut Criterion) {
    let points: Vec<UtilizationPoint> = (0..12)
        .map(|i| {
            let l = 50.0 * 2f64.powi(i);
            UtilizationPoint {
                system_size: l,
                utilization: 0.2465 + 0.24 / l,
                stderr: 1e-4,
            }
        })
        .collect();
    let inv: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (1.0 / p.system_size, p.utilization))
        .collect();
    c.bench_function("krug_meakin_12pt", |b| {
        b.iter(|| black_box(krug_meakin_extrapolate(&points, 0.5).unwrap()))
    });
    c.bench_function("rational_loo_12pt", |b| {
        b.iter(|| black_box(rational_extrapolate(&inv, None).unwrap()))
    });
}

criterion_group!(benches, bench_ensemble, bench_extrapolation);
criterion_main!(benches);
