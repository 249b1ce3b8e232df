//! Experiment specification files.
//!
//! A spec is a TOML document describing a sweep over ring sizes, per-PE site
//! counts, and window widths, plus the ensemble and measurement settings:
//!
//! ```toml
//! mode = "conservative"            # or "random-deposition"
//! l = [100, 1000]
//! n_v = [1, 10]
//! delta = [10.0, "unconstrained"]
//! steps = 20000
//! trials = 64
//! master_seed = 42
//! record = ["u", "w", "w2", "wa"]  # optional, default: every statistic
//! record_every = 1                 # optional
//! burn_in = "auto"                 # optional: "auto" or a step count
//! instrumentation = false          # optional: mean-field wait counters
//! randomized_start_spread = 0.0    # optional: uniform start width
//! max_pe_steps = 10000000000       # optional resource budget
//! allow_budget_excess = false      # optional guard override
//! ```

use serde::{Deserialize, Serialize};

use sth_core::{DeltaWindow, StatId, UpdateMode};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    Conservative,
    RandomDeposition,
}

impl From<ModeSpec> for UpdateMode {
    fn from(mode: ModeSpec) -> UpdateMode {
        match mode {
            ModeSpec::Conservative => UpdateMode::Conservative,
            ModeSpec::RandomDeposition => UpdateMode::RandomDeposition,
        }
    }
}

/// A window entry: a nonnegative number or the string "unconstrained".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Width(f64),
    Named(String),
}

impl DeltaSpec {
    pub fn to_window(&self) -> Result<DeltaWindow> {
        match self {
            DeltaSpec::Width(w) => Ok(DeltaWindow::Finite(*w)),
            DeltaSpec::Named(name) if name == "unconstrained" || name == "inf" => {
                Ok(DeltaWindow::Unconstrained)
            }
            DeltaSpec::Named(other) => Err(CliError::Precondition(format!(
                "delta entry {other:?} is neither a number nor \"unconstrained\""
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BurnInSpec {
    Steps(u64),
    Named(String),
}

impl Default for BurnInSpec {
    fn default() -> Self {
        BurnInSpec::Named("auto".into())
    }
}

fn default_record() -> Vec<String> {
    StatId::ALL.iter().map(|s| s.name().to_string()).collect()
}

fn default_record_every() -> u64 {
    1
}

/// Default resource budget: 1e10 PE-step attempts.
pub const DEFAULT_BUDGET: u64 = 10_000_000_000;

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

/// One experiment: the cross product of `l`, `n_v`, and `delta` defines the
/// sweep cells, each run for `trials` independent trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: ModeSpec,
    pub l: Vec<u64>,
    pub n_v: Vec<u64>,
    pub delta: Vec<DeltaSpec>,
    pub steps: u64,
    pub trials: u32,
    pub master_seed: u64,
    #[serde(default = "default_record")]
    pub record: Vec<String>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub burn_in: BurnInSpec,
    #[serde(default)]
    pub instrumentation: bool,
    #[serde(default)]
    pub randomized_start_spread: f64,
    #[serde(default = "default_budget")]
    pub max_pe_steps: u64,
    #[serde(default)]
    pub allow_budget_excess: bool,
}

impl ExperimentSpec {
    pub fn parse(text: &str, path: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l.is_empty() || self.n_v.is_empty() || self.delta.is_empty() {
            return Err(CliError::Precondition(
                "sweep lists l, n_v, delta must all be nonempty".into(),
            ));
        }
        if self.l.contains(&0) || self.n_v.contains(&0) {
            return Err(CliError::Precondition("l and n_v entries must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Precondition("trials must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(CliError::Precondition("steps must be >= 1".into()));
        }
        if self.record_every == 0 {
            return Err(CliError::Precondition("record_every must be >= 1".into()));
        }
        for entry in &self.delta {
            let window = entry.to_window()?;
            if let DeltaWindow::Finite(w) = window {
                if !w.is_finite() || w < 0.0 {
                    return Err(CliError::Precondition(format!(
                        "delta entries must be nonnegative, got {w}"
                    )));
                }
            }
        }
        if let BurnInSpec::Named(name) = &self.burn_in {
            if name != "auto" {
                return Err(CliError::Precondition(format!(
                    "burn_in must be a step count or \"auto\", got {name:?}"
                )));
            }
        }
        if let BurnInSpec::Steps(b) = self.burn_in {
            if b >= self.steps {
                return Err(CliError::Precondition(format!(
                    "burn_in {b} must be smaller than steps {}",
                    self.steps
                )));
            }
        }
        for name in &self.record {
            if StatId::parse(name).is_none() {
                return Err(CliError::Precondition(format!(
                    "unknown statistic {name:?} in record list; known: {}",
                    default_record().join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Recorded statistics as ids.
    pub fn record_stats(&self) -> Vec<StatId> {
        let mut stats: Vec<StatId> = self
            .record
            .iter()
            .filter_map(|name| StatId::parse(name))
            .collect();
        stats.sort_by_key(|s| s.index());
        stats.dedup();
        stats
    }

    /// All sweep cells in deterministic order (l outer, n_v middle, delta
    /// inner), with their flat index.
    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        let mut cells = Vec::new();
        let mut index = 0u64;
        for &l in &self.l {
            for &n_v in &self.n_v {
                for delta in &self.delta {
                    cells.push(SweepCell {
                        index,
                        n_pes: l as usize,
                        sites_per_pe: n_v,
                        window: delta.to_window()?,
                    });
                    index += 1;
                }
            }
        }
        Ok(cells)
    }

    /// Total PE-step attempts the sweep will consume.
    pub fn planned_pe_steps(&self) -> u128 {
        let per_trial: u128 = self.l.iter().map(|&l| l as u128).sum::<u128>()
            * self.n_v.len() as u128
            * self.delta.len() as u128
            * self.steps as u128;
        per_trial * self.trials as u128
    }

    /// Burn-in for one cell. Explicit values are clamped to leave a tail;
    /// auto picks 3 L^(3/2) for unconstrained runs (the horizon decorrelates
    /// on the L^z scale) and half the run for window-constrained ones, whose
    /// plateau entry is detected after the fact.
    pub fn burn_in_for(&self, cell: &SweepCell) -> u64 {
        let cap = self.steps / 2;
        match self.burn_in {
            BurnInSpec::Steps(b) => b.min(cap),
            BurnInSpec::Named(_) => match cell.window {
                DeltaWindow::Unconstrained => {
                    ((3.0 * (cell.n_pes as f64).powf(1.5)).ceil() as u64).min(cap)
                }
                DeltaWindow::Finite(_) => cap,
            },
        }
    }
}

/// One (L, N_V, delta) sweep cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub index: u64,
    pub n_pes: usize,
    pub sites_per_pe: u64,
    pub window: DeltaWindow,
}
