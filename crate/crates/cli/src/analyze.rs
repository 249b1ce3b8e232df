//! Archive analysis: scaling exponents, infinite-ring extrapolations, the
//! composite-model comparison, and the mean-field consistency check.

use serde_json::json;

use sth_core::{
    crossover_time, eval_composite, growth_exponent, krug_meakin_extrapolate, mean_field_u,
    published_params, rational_extrapolate, rational_interpolate_at_zero, roughness_exponent,
    DeltaWindow, MeanFieldRegime, SaturatedWidth, StatId, UtilizationPoint,
};

use crate::archive::{CellTable, ResultArchive};
use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyzeTask {
    Exponents,
    Extrapolate,
    CompositeFit,
    MeanField,
}

impl AnalyzeTask {
    pub fn name(self) -> &'static str {
        match self {
            AnalyzeTask::Exponents => "exponents",
            AnalyzeTask::Extrapolate => "extrapolate",
            AnalyzeTask::CompositeFit => "composite-fit",
            AnalyzeTask::MeanField => "meanfield",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    /// Pass/fail tolerance; defaults depend on the task (7% composite,
    /// 15% mean-field).
    pub tolerance: Option<f64>,
    /// Roughness exponent for the finite-size correction form.
    pub alpha: f64,
    /// Growth-fit window override.
    pub window: Option<(u64, u64)>,
    /// Rational degrees override.
    pub degrees: Option<(usize, usize)>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            tolerance: None,
            alpha: 0.5,
            window: None,
            degrees: None,
        }
    }
}

/// Machine- and human-readable analysis output.
#[derive(Clone, Debug)]
pub struct Report {
    pub task: &'static str,
    pub human: String,
    pub json: serde_json::Value,
    pub passed: Option<bool>,
}

fn cell_label(cell: &CellTable) -> String {
    format!("L={} N_V={} delta={}", cell.l, cell.n_v, cell.delta)
}

type CellGroup<'a> = ((u64, DeltaWindow), Vec<&'a CellTable>);

/// Cells grouped by (n_v, delta), each group sorted by L.
fn groups(archive: &ResultArchive) -> Vec<CellGroup<'_>> {
    let mut out: Vec<CellGroup<'_>> = Vec::new();
    for cell in &archive.cells {
        let key = (cell.n_v, cell.delta);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, cells)) => cells.push(cell),
            None => out.push((key, vec![cell])),
        }
    }
    for (_, cells) in &mut out {
        cells.sort_by_key(|c| c.l);
        cells.dedup_by_key(|c| c.l);
    }
    out
}

fn extrapolation_groups(archive: &ResultArchive) -> Result<Vec<CellGroup<'_>>> {
    let all = groups(archive);
    let usable: Vec<_> = all.iter().filter(|(_, cells)| cells.len() >= 3).cloned().collect();
    if usable.is_empty() {
        let listing = all
            .iter()
            .map(|((n_v, delta), cells)| {
                format!(
                    "  N_V={n_v} delta={delta}: have L = {:?}, need >= 3 distinct sizes",
                    cells.iter().map(|c| c.l).collect::<Vec<_>>()
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        return Err(CliError::Precondition(format!(
            "no (N_V, delta) group has three system sizes to extrapolate from; run more L values:\n{listing}"
        )));
    }
    Ok(usable)
}

fn utilization_points(cells: &[&CellTable]) -> Vec<UtilizationPoint> {
    cells
        .iter()
        .map(|c| {
            let s = c.series.summary_for(StatId::Utilization);
            UtilizationPoint {
                system_size: c.l as f64,
                utilization: s.mean,
                stderr: s.stderr.max(1e-9),
            }
        })
        .collect()
}

pub fn analyze(archive: &ResultArchive, task: AnalyzeTask, opts: &AnalyzeOptions) -> Result<Report> {
    match task {
        AnalyzeTask::Exponents => exponents(archive, opts),
        AnalyzeTask::Extrapolate => extrapolate(archive, opts),
        AnalyzeTask::CompositeFit => composite_fit(archive, opts),
        AnalyzeTask::MeanField => mean_field(archive, opts),
    }
}

fn exponents(archive: &ResultArchive, opts: &AnalyzeOptions) -> Result<Report> {
    if archive.cells.is_empty() {
        return Err(CliError::Precondition(
            "archive holds no cells to analyze".into(),
        ));
    }
    let mut human = String::new();
    let mut rows = Vec::new();

    for cell in &archive.cells {
        let crossover = crossover_time(&cell.series).ok();
        let window = opts.window.unwrap_or_else(|| {
            let hi = crossover
                .map(|t| (t / 4.0) as u64)
                .unwrap_or(cell.series.cell.steps / 4)
                .max(20);
            (10, hi)
        });
        let growth = growth_exponent(&cell.series, window);
        match &growth {
            Ok(fit) => human.push_str(&format!(
                "{}: beta = {:.4} +- {:.4} over t in [{:.0}, {:.0}]{}\n",
                cell_label(cell),
                fit.value,
                fit.stderr,
                fit.fit_window.0,
                fit.fit_window.1,
                crossover
                    .map(|t| format!(", crossover ~ {t:.0}"))
                    .unwrap_or_default()
            )),
            Err(e) => human.push_str(&format!("{}: growth fit failed: {e}\n", cell_label(cell))),
        }
        rows.push(json!({
            "cell": { "l": cell.l, "n_v": cell.n_v, "delta": cell.delta },
            "beta": growth.as_ref().ok().map(|f| f.value),
            "beta_stderr": growth.as_ref().ok().map(|f| f.stderr),
            "window": [window.0, window.1],
            "crossover_step": crossover,
        }));
    }

    let mut alpha_rows = Vec::new();
    for ((n_v, delta), cells) in groups(archive) {
        if cells.len() < 3 {
            continue;
        }
        let points: Vec<SaturatedWidth> = cells
            .iter()
            .map(|c| {
                let s = c.series.summary_for(StatId::WidthSq);
                SaturatedWidth {
                    system_size: c.l as f64,
                    width_sq: s.mean,
                    stderr: s.stderr,
                    saturated: s.saturated,
                }
            })
            .collect();
        match roughness_exponent(&points) {
            Ok(fit) => {
                human.push_str(&format!(
                    "N_V={n_v} delta={delta}: alpha = {:.4} +- {:.4} over L in [{:.0}, {:.0}]\n",
                    fit.value, fit.stderr, fit.fit_window.0, fit.fit_window.1
                ));
                alpha_rows.push(json!({
                    "n_v": n_v, "delta": delta,
                    "alpha": fit.value, "alpha_stderr": fit.stderr,
                }));
            }
            Err(e) => human.push_str(&format!("N_V={n_v} delta={delta}: roughness fit: {e}\n")),
        }
    }

    Ok(Report {
        task: "exponents",
        human,
        json: json!({ "task": "exponents", "growth": rows, "roughness": alpha_rows }),
        passed: None,
    })
}

fn extrapolate(archive: &ResultArchive, opts: &AnalyzeOptions) -> Result<Report> {
    let groups = extrapolation_groups(archive)?;
    let mut human = String::new();
    let mut rows = Vec::new();
    let mut consistent = true;

    for ((n_v, delta), cells) in groups {
        let points = utilization_points(&cells);
        let km = krug_meakin_extrapolate(&points, opts.alpha)?;
        let inv: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (1.0 / p.system_size, p.utilization))
            .collect();
        let rational = rational_extrapolate(&inv, opts.degrees);
        let interp = rational_interpolate_at_zero(&inv).ok();

        let (rat_text, rat_json, agree) = match &rational {
            Ok(r) => {
                let combined = (km.uncertainty.powi(2) + r.uncertainty.powi(2)).sqrt();
                let agree = (km.u_inf - r.u_inf).abs() <= (3.0 * combined).max(0.02 * km.u_inf.abs());
                (
                    format!(
                        "rational({},{}) u_inf = {:.5} +- {:.5}",
                        r.degrees.unwrap().0,
                        r.degrees.unwrap().1,
                        r.u_inf,
                        r.uncertainty
                    ),
                    json!({ "u_inf": r.u_inf, "uncertainty": r.uncertainty, "degrees": r.degrees }),
                    agree,
                )
            }
            Err(e) => (format!("rational fit failed: {e}"), json!(null), true),
        };
        consistent &= agree;

        human.push_str(&format!(
            "N_V={n_v} delta={delta} (L = {:?}):\n  krug-meakin(alpha={}) u_inf = {:.5} +- {:.5}\n  {rat_text}\n",
            cells.iter().map(|c| c.l).collect::<Vec<_>>(),
            opts.alpha,
            km.u_inf,
            km.uncertainty,
        ));
        if let Some(i) = &interp {
            human.push_str(&format!(
                "  exact-interpolation cross-check u_inf = {:.5} (+- {:.1e})\n",
                i.u_inf, i.uncertainty
            ));
        }
        rows.push(json!({
            "n_v": n_v, "delta": delta,
            "sizes": cells.iter().map(|c| c.l).collect::<Vec<_>>(),
            "krug_meakin": { "u_inf": km.u_inf, "uncertainty": km.uncertainty,
                              "alpha": opts.alpha, "coefficients": km.coefficients },
            "rational": rat_json,
            "exact_interpolation": interp.map(|i| i.u_inf),
            "methods_agree": agree,
        }));
    }

    if !consistent {
        human.push_str("note: extrapolation methods disagree beyond combined uncertainties\n");
    }
    Ok(Report {
        task: "extrapolate",
        human,
        json: json!({ "task": "extrapolate", "groups": rows, "methods_agree": consistent }),
        passed: None,
    })
}

fn composite_fit(archive: &ResultArchive, opts: &AnalyzeOptions) -> Result<Report> {
    let tolerance = opts.tolerance.unwrap_or(0.07);
    let groups = extrapolation_groups(archive)?;
    let params = published_params();
    let mut human = String::new();
    let mut rows = Vec::new();
    let mut all_ok = true;
    let mut any = false;

    for ((n_v, delta), cells) in groups {
        let DeltaWindow::Finite(width) = delta else {
            continue; // the composite model is for finite windows
        };
        any = true;
        let points = utilization_points(&cells);
        let inv: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (1.0 / p.system_size, p.utilization))
            .collect();
        let extrapolated = match rational_extrapolate(&inv, opts.degrees) {
            Ok(r) => r,
            Err(_) => krug_meakin_extrapolate(&points, opts.alpha)?,
        };
        let model = eval_composite(n_v, width, params).map_err(CliError::Core)?;
        let rel_dev = extrapolated.u_inf / model - 1.0;
        let ok = rel_dev.abs() <= tolerance;
        all_ok &= ok;
        human.push_str(&format!(
            "N_V={n_v} delta={width}: simulated u_inf = {:.4}, model = {model:.4}, deviation {:+.1}% [{}]\n",
            extrapolated.u_inf,
            rel_dev * 100.0,
            if ok { "ok" } else { "OUT OF TOLERANCE" }
        ));
        rows.push(json!({
            "n_v": n_v, "delta": width,
            "u_inf": extrapolated.u_inf,
            "model": model,
            "relative_deviation": rel_dev,
            "within_tolerance": ok,
        }));
    }
    if !any {
        return Err(CliError::Precondition(
            "composite-fit needs finite-window groups with >= 3 system sizes".into(),
        ));
    }
    human.push_str(&format!(
        "composite fit: {} (tolerance {:.0}%)\n",
        if all_ok { "PASS" } else { "FAIL" },
        tolerance * 100.0
    ));
    Ok(Report {
        task: "composite-fit",
        human,
        json: json!({ "task": "composite-fit", "tolerance": tolerance,
                      "cells": rows, "passed": all_ok }),
        passed: Some(all_ok),
    })
}

fn mean_field(archive: &ResultArchive, opts: &AnalyzeOptions) -> Result<Report> {
    let tolerance = opts.tolerance.unwrap_or(0.15);
    let mut human = String::new();
    let mut rows = Vec::new();
    let mut all_ok = true;
    let mut any = false;

    for cell in &archive.cells {
        let Some(counters) = &cell.series.counters else {
            continue;
        };
        if cell.n_v < 3 {
            human.push_str(&format!(
                "{}: skipped (mean-field relation needs N_V >= 3)\n",
                cell_label(cell)
            ));
            continue;
        }
        any = true;
        let regime = match cell.delta {
            DeltaWindow::Unconstrained => MeanFieldRegime::Unconstrained,
            DeltaWindow::Finite(_) => MeanFieldRegime::LargeWindow,
        };
        let predicted = mean_field_u(counters, cell.n_v, regime).map_err(CliError::Core)?;
        let measured = cell.series.summary_for(StatId::Utilization).mean;
        let rel_dev = predicted / measured - 1.0;
        let ok = rel_dev.abs() <= tolerance;
        all_ok &= ok;
        human.push_str(&format!(
            "{}: mean-field u = {predicted:.4}, measured = {measured:.4}, deviation {:+.1}% \
             (delta_bar={:.2}, kappa_bar={:.2}, p_w={:.4}, p_delta={:.4}) [{}]\n",
            cell_label(cell),
            rel_dev * 100.0,
            counters.mean_causality_wait(),
            counters.mean_window_wait(),
            counters.p_causality(),
            counters.p_window(),
            if ok { "ok" } else { "OUT OF TOLERANCE" }
        ));
        rows.push(json!({
            "cell": { "l": cell.l, "n_v": cell.n_v, "delta": cell.delta },
            "predicted": predicted,
            "measured": measured,
            "relative_deviation": rel_dev,
            "within_tolerance": ok,
            "counters": counters,
        }));
    }
    if !any {
        return Err(CliError::Precondition(
            "mean-field check needs instrumented cells with N_V >= 3; \
             rerun with instrumentation = true"
                .into(),
        ));
    }
    human.push_str(&format!(
        "mean-field consistency: {} (tolerance {:.0}%)\n",
        if all_ok { "PASS" } else { "FAIL" },
        tolerance * 100.0
    ));
    Ok(Report {
        task: "meanfield",
        human,
        json: json!({ "task": "meanfield", "tolerance": tolerance, "cells": rows, "passed": all_ok }),
        passed: Some(all_ok),
    })
}
