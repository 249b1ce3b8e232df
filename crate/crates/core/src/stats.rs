//! Per-step measurements of a horizon: utilization, surface widths, extreme
//! fluctuations, and the slow/fast simplex decomposition.

use serde::{Deserialize, Serialize};

use crate::horizon::{Horizon, UpdateOutcome};

/// Identifiers for every recorded statistic. The wire names (`name`) are the
/// column headers used by the experiment outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatId {
    Utilization,
    WidthSq,
    Width,
    AbsWidth,
    MeanTime,
    MinTime,
    MaxTime,
    MaxAboveMean,
    MaxBelowMean,
    SlowFraction,
    FastFraction,
    SlowWidthSq,
    FastWidthSq,
    SlowAbsWidth,
    FastAbsWidth,
}

impl StatId {
    pub const ALL: [StatId; 15] = [
        StatId::Utilization,
        StatId::WidthSq,
        StatId::Width,
        StatId::AbsWidth,
        StatId::MeanTime,
        StatId::MinTime,
        StatId::MaxTime,
        StatId::MaxAboveMean,
        StatId::MaxBelowMean,
        StatId::SlowFraction,
        StatId::FastFraction,
        StatId::SlowWidthSq,
        StatId::FastWidthSq,
        StatId::SlowAbsWidth,
        StatId::FastAbsWidth,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn name(self) -> &'static str {
        match self {
            StatId::Utilization => "u",
            StatId::WidthSq => "w2",
            StatId::Width => "w",
            StatId::AbsWidth => "wa",
            StatId::MeanTime => "mean_tau",
            StatId::MinTime => "min_tau",
            StatId::MaxTime => "max_tau",
            StatId::MaxAboveMean => "max_above",
            StatId::MaxBelowMean => "max_below",
            StatId::SlowFraction => "f_S",
            StatId::FastFraction => "f_F",
            StatId::SlowWidthSq => "w2_S",
            StatId::FastWidthSq => "w2_F",
            StatId::SlowAbsWidth => "wa_S",
            StatId::FastAbsWidth => "wa_F",
        }
    }

    pub fn parse(name: &str) -> Option<StatId> {
        StatId::ALL.iter().copied().find(|s| s.name() == name)
    }

    pub fn index(self) -> usize {
        StatId::ALL.iter().position(|&s| s == self).unwrap()
    }
}

/// Measurements of one horizon snapshot after a parallel step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    /// Fraction of PEs that updated this step.
    pub utilization: f64,
    /// Variance-based squared width.
    pub width_sq: f64,
    /// Mean absolute deviation from the mean time.
    pub abs_width: f64,
    pub mean_time: f64,
    pub min_time: f64,
    pub max_time: f64,
    /// Extreme fluctuation above the mean: max - mean.
    pub max_above_mean: f64,
    /// Extreme fluctuation below the mean: mean - min.
    pub max_below_mean: f64,
}

/// Exact convex split of the widths over slow (at or below the mean) and
/// fast (above the mean) PEs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDecomposition {
    pub slow_fraction: f64,
    pub fast_fraction: f64,
    pub slow_width_sq: f64,
    pub fast_width_sq: f64,
    pub slow_abs_width: f64,
    pub fast_abs_width: f64,
}

/// Computes the per-step statistics with two-pass summation.
pub fn step_stats(horizon: &Horizon, outcome: &UpdateOutcome) -> StepStats {
    let n = horizon.local_times.len();
    debug_assert_eq!(outcome.updated.len(), n);
    let inv_n = 1.0 / n as f64;

    let mean_time = horizon.local_times.iter().sum::<f64>() * inv_n;

    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    let mut min_time = f64::INFINITY;
    let mut max_time = f64::NEG_INFINITY;
    for &tau in &horizon.local_times {
        let dev = tau - mean_time;
        sum_sq += dev * dev;
        sum_abs += dev.abs();
        min_time = min_time.min(tau);
        max_time = max_time.max(tau);
    }

    StepStats {
        step: horizon.step_index,
        utilization: outcome.updates() as f64 * inv_n,
        width_sq: sum_sq * inv_n,
        abs_width: sum_abs * inv_n,
        mean_time,
        min_time,
        max_time,
        max_above_mean: max_time - mean_time,
        max_below_mean: mean_time - min_time,
    }
}

/// Partitions PEs into slow (tau <= mean) and fast (tau > mean) groups and
/// computes the per-group widths. An empty fast group contributes zero terms,
/// so the convex reconstruction identities hold regardless.
pub fn slow_fast_decompose(horizon: &Horizon) -> GroupDecomposition {
    let mean = horizon.local_times.iter().sum::<f64>() / horizon.local_times.len() as f64;
    slow_fast_decompose_with_mean(horizon, mean)
}

/// Same as [`slow_fast_decompose`] with the mean already known.
pub fn slow_fast_decompose_with_mean(horizon: &Horizon, mean_time: f64) -> GroupDecomposition {
    let n = horizon.local_times.len();
    let mut n_slow = 0usize;
    let mut slow_sq = 0.0;
    let mut slow_abs = 0.0;
    let mut fast_sq = 0.0;
    let mut fast_abs = 0.0;
    for &tau in &horizon.local_times {
        let dev = tau - mean_time;
        if tau <= mean_time {
            n_slow += 1;
            slow_sq += dev * dev;
            slow_abs += -dev;
        } else {
            fast_sq += dev * dev;
            fast_abs += dev;
        }
    }
    let n_fast = n - n_slow;
    let group = |count: usize, sq: f64, abs: f64| {
        if count == 0 {
            (0.0, 0.0)
        } else {
            (sq / count as f64, abs / count as f64)
        }
    };
    let (slow_width_sq, slow_abs_width) = group(n_slow, slow_sq, slow_abs);
    let (fast_width_sq, fast_abs_width) = group(n_fast, fast_sq, fast_abs);
    GroupDecomposition {
        slow_fraction: n_slow as f64 / n as f64,
        fast_fraction: n_fast as f64 / n as f64,
        slow_width_sq,
        fast_width_sq,
        slow_abs_width,
        fast_abs_width,
    }
}

/// One recorded step: the horizon statistics plus the group decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stats: StepStats,
    pub groups: GroupDecomposition,
}

impl StepRecord {
    pub fn measure(horizon: &Horizon, outcome: &UpdateOutcome) -> StepRecord {
        let stats = step_stats(horizon, outcome);
        let groups = slow_fast_decompose_with_mean(horizon, stats.mean_time);
        StepRecord { stats, groups }
    }

    /// All statistics of this record in [`StatId::ALL`] order.
    pub fn values(&self) -> [f64; StatId::COUNT] {
        let mut out = [0.0; StatId::COUNT];
        for (slot, stat) in out.iter_mut().zip(StatId::ALL) {
            *slot = self.value(stat);
        }
        out
    }

    /// The value of a statistic in this record. `Width` is the square root of
    /// the per-trial variance, taken before any ensemble averaging.
    pub fn value(&self, stat: StatId) -> f64 {
        match stat {
            StatId::Utilization => self.stats.utilization,
            StatId::WidthSq => self.stats.width_sq,
            StatId::Width => self.stats.width_sq.sqrt(),
            StatId::AbsWidth => self.stats.abs_width,
            StatId::MeanTime => self.stats.mean_time,
            StatId::MinTime => self.stats.min_time,
            StatId::MaxTime => self.stats.max_time,
            StatId::MaxAboveMean => self.stats.max_above_mean,
            StatId::MaxBelowMean => self.stats.max_below_mean,
            StatId::SlowFraction => self.groups.slow_fraction,
            StatId::FastFraction => self.groups.fast_fraction,
            StatId::SlowWidthSq => self.groups.slow_width_sq,
            StatId::FastWidthSq => self.groups.fast_width_sq,
            StatId::SlowAbsWidth => self.groups.slow_abs_width,
            StatId::FastAbsWidth => self.groups.fast_abs_width,
        }
    }
}
