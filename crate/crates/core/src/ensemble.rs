//! Ensemble execution and across-trial aggregation.
//!
//! Trials are independent and run in parallel, but partial results are always
//! merged in trial-index order over fixed-size chunks, so the aggregated
//! numbers are bit-identical for any thread count. Per-trial seeds derive
//! from the cell seed by index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::fits::{CounterAccumulator, MeanFieldCounters};
use crate::horizon::{DeltaWindow, SimConfig, Trial, UpdateMode, UpdateOutcome};
use crate::rng::derive_seed;
use crate::stats::{StatId, StepRecord};

/// Trials merge in index order over chunks of this fixed size; the value must
/// not depend on the thread count or the merge would not be reproducible.
const MERGE_CHUNK: usize = 8;

/// Seed-derivation domain separating trial seeds from other uses.
const TRIAL_DOMAIN: u64 = 1;

/// Cell identity and measurement settings shared by every trial of an
/// ensemble. The per-trial seed is not part of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub mode: UpdateMode,
    pub n_pes: usize,
    pub sites_per_pe: u64,
    pub window: DeltaWindow,
    pub steps: u64,
    /// Steps discarded before steady-state accumulation.
    pub burn_in: u64,
    /// Stride for recorded time-series points.
    pub record_every: u64,
    /// Width of the uniform randomized start; zero means synchronized.
    pub randomized_spread: f64,
}

/// Everything needed to run one ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub cell: CellConfig,
    pub n_trials: u32,
    /// Base seed; trial seeds derive from it by index.
    pub seed: u64,
    /// Accumulate mean-field waiting counters.
    pub instrument: bool,
}

impl EnsembleSpec {
    fn validate(&self) -> Result<()> {
        self.sim_config(0).validate()?;
        if self.n_trials < 1 {
            return Err(CoreError::InvalidConfig("n_trials must be >= 1".into()));
        }
        if self.cell.record_every < 1 {
            return Err(CoreError::InvalidConfig("record_every must be >= 1".into()));
        }
        if self.cell.burn_in >= self.cell.steps {
            return Err(CoreError::InvalidConfig(format!(
                "burn_in {} must be smaller than steps {}",
                self.cell.burn_in, self.cell.steps
            )));
        }
        Ok(())
    }

    fn sim_config(&self, trial_index: u32) -> SimConfig {
        SimConfig {
            n_pes: self.cell.n_pes,
            sites_per_pe: self.cell.sites_per_pe,
            window: self.cell.window,
            mode: self.cell.mode,
            steps: self.cell.steps,
            seed: derive_seed(self.seed, TRIAL_DOMAIN, trial_index as u64),
        }
    }
}

/// The recorded step grid: step 1, every `record_every`-th step after it, and
/// always the final step.
pub fn recorded_steps(steps: u64, record_every: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = (1..=steps).step_by(record_every as usize).collect();
    if *grid.last().unwrap() != steps {
        grid.push(steps);
    }
    grid
}

/// Ensemble mean and standard error of one statistic over the recorded grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSeries {
    pub stat: StatId,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Steady-state summary of one statistic: across-trial mean and standard
/// error of the per-trial tail averages over `window` (post burn-in, not
/// thinned), plus a saturation flag from the trailing-slope test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub stat: StatId,
    pub mean: f64,
    pub stderr: f64,
    pub saturated: bool,
    pub window: (u64, u64),
}

/// Time series of ensemble-averaged statistics with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub cell: CellConfig,
    pub n_trials: u32,
    pub steps_recorded: Vec<u64>,
    pub series: Vec<StatSeries>,
    pub summary: Vec<StatSummary>,
    pub counters: Option<MeanFieldCounters>,
}

impl EnsembleSeries {
    /// The recorded series for a statistic; `None` when it was filtered out
    /// of this table.
    pub fn try_stat(&self, id: StatId) -> Option<&StatSeries> {
        self.series.iter().find(|s| s.stat == id)
    }

    pub fn stat(&self, id: StatId) -> &StatSeries {
        self.try_stat(id)
            .unwrap_or_else(|| panic!("statistic {} not recorded", id.name()))
    }

    pub fn try_summary_for(&self, id: StatId) -> Option<&StatSummary> {
        self.summary.iter().find(|s| s.stat == id)
    }

    pub fn summary_for(&self, id: StatId) -> &StatSummary {
        self.try_summary_for(id)
            .unwrap_or_else(|| panic!("statistic {} not summarized", id.name()))
    }

    /// Restrict the recorded series to `stats` (summaries are kept whole).
    pub fn retain_stats(&mut self, stats: &[StatId]) {
        self.series.retain(|s| stats.contains(&s.stat));
    }
}

struct TrialOutput {
    records: Vec<StepRecord>,
    tail_sums: [f64; StatId::COUNT],
    tail_count: u64,
    counters: Option<MeanFieldCounters>,
}

fn run_trial(spec: &EnsembleSpec, trial_index: u32) -> Result<TrialOutput> {
    let config = spec.sim_config(trial_index);
    let n = config.n_pes;
    let mut trial = Trial::with_randomized_start(config, spec.cell.randomized_spread)?;
    let mut outcome = UpdateOutcome::new(n);
    let mut counters = spec
        .instrument
        .then(|| CounterAccumulator::new(n, spec.cell.burn_in));

    let grid_len = recorded_steps(spec.cell.steps, spec.cell.record_every).len();
    let mut records = Vec::with_capacity(grid_len);
    let mut tail_sums = [0.0; StatId::COUNT];
    let mut tail_count = 0u64;

    let steps = spec.cell.steps;
    let stride = spec.cell.record_every;
    for t in 1..=steps {
        trial.step(&mut outcome);
        let record = StepRecord::measure(&trial.horizon, &outcome);
        if let Some(acc) = counters.as_mut() {
            acc.observe(&outcome, t);
        }
        if t > spec.cell.burn_in {
            for (slot, value) in tail_sums.iter_mut().zip(record.values()) {
                *slot += value;
            }
            tail_count += 1;
        }
        if (t - 1).is_multiple_of(stride) || t == steps {
            records.push(record);
        }
    }

    Ok(TrialOutput {
        records,
        tail_sums,
        tail_count,
        counters: counters.map(CounterAccumulator::finish),
    })
}

struct Accumulator {
    cell: CellConfig,
    grid: Vec<u64>,
    n: u32,
    sum: Vec<[f64; StatId::COUNT]>,
    sum_sq: Vec<[f64; StatId::COUNT]>,
    tail_mean_sum: [f64; StatId::COUNT],
    tail_mean_sum_sq: [f64; StatId::COUNT],
    counters: Option<MeanFieldCounters>,
}

impl Accumulator {
    fn new(cell: CellConfig, grid: Vec<u64>) -> Self {
        let len = grid.len();
        Accumulator {
            cell,
            grid,
            n: 0,
            sum: vec![[0.0; StatId::COUNT]; len],
            sum_sq: vec![[0.0; StatId::COUNT]; len],
            tail_mean_sum: [0.0; StatId::COUNT],
            tail_mean_sum_sq: [0.0; StatId::COUNT],
            counters: None,
        }
    }

    fn add(&mut self, output: &TrialOutput) -> Result<()> {
        if output.records.len() != self.grid.len() {
            return Err(CoreError::InvalidConfig(format!(
                "trial recorded {} points, expected {}",
                output.records.len(),
                self.grid.len()
            )));
        }
        self.n += 1;
        for (i, record) in output.records.iter().enumerate() {
            for (j, value) in record.values().into_iter().enumerate() {
                self.sum[i][j] += value;
                self.sum_sq[i][j] += value * value;
            }
        }
        if output.tail_count > 0 {
            for j in 0..StatId::COUNT {
                let mean = output.tail_sums[j] / output.tail_count as f64;
                self.tail_mean_sum[j] += mean;
                self.tail_mean_sum_sq[j] += mean * mean;
            }
        }
        if let Some(c) = &output.counters {
            self.counters.get_or_insert_with(MeanFieldCounters::default).merge(c);
        }
        Ok(())
    }

    fn finalize(self) -> EnsembleSeries {
        let n = self.n as f64;
        let stderr_of = |sum: f64, sum_sq: f64| {
            if self.n < 2 {
                return 0.0;
            }
            let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        };

        let mut series: Vec<StatSeries> = StatId::ALL
            .iter()
            .map(|&stat| StatSeries {
                stat,
                mean: Vec::with_capacity(self.grid.len()),
                stderr: Vec::with_capacity(self.grid.len()),
            })
            .collect();
        for i in 0..self.grid.len() {
            for j in 0..StatId::COUNT {
                series[j].mean.push(self.sum[i][j] / n);
                series[j].stderr.push(stderr_of(self.sum[i][j], self.sum_sq[i][j]));
            }
        }

        let window = (self.cell.burn_in + 1, self.cell.steps);
        let summary = StatId::ALL
            .iter()
            .enumerate()
            .map(|(j, &stat)| {
                let mean = self.tail_mean_sum[j] / n;
                let stderr = stderr_of(self.tail_mean_sum[j], self.tail_mean_sum_sq[j]);
                let saturated =
                    trailing_slope_is_flat(&self.grid, &series[j].mean, self.cell.burn_in);
                StatSummary {
                    stat,
                    mean,
                    stderr,
                    saturated,
                    window,
                }
            })
            .collect();

        EnsembleSeries {
            cell: self.cell,
            n_trials: self.n,
            steps_recorded: self.grid,
            series,
            summary,
            counters: self.counters,
        }
    }
}

/// Runs all trials of an ensemble and aggregates them.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleSeries> {
    spec.validate()?;
    let grid = recorded_steps(spec.cell.steps, spec.cell.record_every);
    let mut acc = Accumulator::new(spec.cell.clone(), grid);

    let indices: Vec<u32> = (0..spec.n_trials).collect();
    for chunk in indices.chunks(MERGE_CHUNK) {
        let outputs: Vec<Result<TrialOutput>> =
            chunk.par_iter().map(|&i| run_trial(spec, i)).collect();
        for output in outputs {
            acc.add(&output?)?;
        }
    }
    Ok(acc.finalize())
}

/// Aggregates already-measured trial series (the standalone form of the
/// ensemble average). All trials must share the cell configuration and
/// length; the steady-state tails are taken from the recorded points after
/// burn-in.
pub fn aggregate(cell: CellConfig, trials: &[Vec<StepRecord>]) -> Result<EnsembleSeries> {
    if trials.len() < 2 {
        return Err(CoreError::InvalidConfig(format!(
            "ensemble average needs at least 2 trials, got {}",
            trials.len()
        )));
    }
    let grid = recorded_steps(cell.steps, cell.record_every);
    if trials[0].len() != grid.len() {
        return Err(CoreError::InvalidConfig(format!(
            "trials record {} points but the cell config implies {}",
            trials[0].len(),
            grid.len()
        )));
    }
    let burn_in = cell.burn_in;
    let mut acc = Accumulator::new(cell, grid.clone());
    for records in trials {
        if records.len() != trials[0].len() {
            return Err(CoreError::InvalidConfig("trial series lengths differ".into()));
        }
        let mut tail_sums = [0.0; StatId::COUNT];
        let mut tail_count = 0u64;
        for (t, record) in grid.iter().zip(records) {
            if *t > burn_in {
                for (slot, value) in tail_sums.iter_mut().zip(record.values()) {
                    *slot += value;
                }
                tail_count += 1;
            }
        }
        acc.add(&TrialOutput {
            records: records.clone(),
            tail_sums,
            tail_count,
            counters: None,
        })?;
    }
    Ok(acc.finalize())
}

/// Normalized trailing-slope test over the recorded points after `burn_in`:
/// the series counts as flat when the regression slope per step, divided by
/// the window mean, is below 1e-3 in magnitude.
fn trailing_slope_is_flat(grid: &[u64], mean: &[f64], burn_in: u64) -> bool {
    let start = grid.partition_point(|&t| t <= burn_in);
    let ts = &grid[start..];
    let ys = &mean[start..];
    if ts.len() < 3 {
        return false;
    }
    normalized_slope(ts, ys).abs() < SATURATION_SLOPE_TOLERANCE
}

/// Tolerance on the per-step slope of a plateau, normalized by its mean.
pub const SATURATION_SLOPE_TOLERANCE: f64 = 1e-3;

fn normalized_slope(ts: &[u64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tbar = ts.iter().map(|&t| t as f64).sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let dx = t as f64 - tbar;
        sxx += dx * dx;
        sxy += dx * (y - ybar);
    }
    if sxx == 0.0 {
        return f64::INFINITY;
    }
    let slope = sxy / sxx;
    slope / ybar.abs().max(f64::MIN_POSITIVE)
}

/// Steady-state value of one statistic: mean over the trailing quarter of the
/// recorded series, accepted as saturated when the normalized slope over that
/// window is below tolerance. The standard error is the average per-point
/// ensemble error over the window (successive steps are strongly correlated,
/// so the window length is not credited).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub mean: f64,
    pub stderr: f64,
    pub saturated: bool,
    pub window: (u64, u64),
}

pub fn steady_state_mean(series: &EnsembleSeries, stat: StatId) -> Result<SteadyState> {
    if series.cell.steps < 100 {
        return Err(CoreError::InsufficientData(format!(
            "steady-state detection needs at least 100 steps, got {}",
            series.cell.steps
        )));
    }
    let grid = &series.steps_recorded;
    let n = grid.len();
    if n < 8 {
        return Err(CoreError::InsufficientData(format!(
            "steady-state detection needs at least 8 recorded points, got {n}"
        )));
    }
    let start = n - (n / 4).max(2);
    let ts = &grid[start..];
    let s = series.try_stat(stat).ok_or_else(|| {
        CoreError::InsufficientData(format!("statistic {} was not recorded", stat.name()))
    })?;
    let ys = &s.mean[start..];
    let errs = &s.stderr[start..];

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let stderr = errs.iter().sum::<f64>() / errs.len() as f64;
    let saturated = normalized_slope(ts, ys).abs() < SATURATION_SLOPE_TOLERANCE;
    Ok(SteadyState {
        mean,
        stderr,
        saturated,
        window: (ts[0], *ts.last().unwrap()),
    })
}

/// First recorded step from which the series stays within `band` (relative)
/// of `plateau`. `None` when the series never settles into the band.
pub fn plateau_entry_step(grid: &[u64], mean: &[f64], plateau: f64, band: f64) -> Option<u64> {
    let tolerance = band * plateau.abs();
    let mut entry = None;
    for (&t, &y) in grid.iter().zip(mean) {
        if (y - plateau).abs() <= tolerance {
            entry.get_or_insert(t);
        } else {
            entry = None;
        }
    }
    entry
}
