//! State and update rules for one simulation trial.
//!
//! A ring of processing elements (PEs) carries local virtual times. At every
//! parallel step each PE attempts to commit its next event: a uniformly
//! chosen volume element. A conservative PE may advance only if it cannot
//! violate causality (its time does not exceed the relevant neighbor times),
//! and, when a moving window is configured, only if its time lies within the
//! window width of the global minimum. A blocked PE stays idle and retries
//! the same pending site at the next step; the site is redrawn only after a
//! successful update. Every decision in a step is taken against the frozen
//! snapshot of the previous step, so the sweep order is immaterial.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::{self, PeStepStream, StreamKey};

/// Moving-window constraint width. `Unconstrained` is an explicit variant,
/// never encoded as a large float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeltaWindow {
    Unconstrained,
    Finite(f64),
}

impl DeltaWindow {
    pub fn is_finite(&self) -> bool {
        matches!(self, DeltaWindow::Finite(_))
    }
}

impl std::fmt::Display for DeltaWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeltaWindow::Unconstrained => write!(f, "unconstrained"),
            DeltaWindow::Finite(w) => write!(f, "{w}"),
        }
    }
}

/// Whether the causality rule is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateMode {
    /// Border picks must not run ahead of the affected neighbor.
    Conservative,
    /// Causality is never checked; times grow by random deposition.
    RandomDeposition,
}

/// Full parameterization of one simulation trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of processing elements on the ring.
    pub n_pes: usize,
    /// Volume elements (lattice sites) per PE.
    pub sites_per_pe: u64,
    /// Moving-window width.
    pub window: DeltaWindow,
    pub mode: UpdateMode,
    /// Number of parallel update attempts to simulate.
    pub steps: u64,
    /// Master seed for the trial.
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pes < 1 {
            return Err(CoreError::InvalidConfig("n_pes must be >= 1".into()));
        }
        if self.sites_per_pe < 1 {
            return Err(CoreError::InvalidConfig("sites_per_pe must be >= 1".into()));
        }
        if self.steps < 1 {
            return Err(CoreError::InvalidConfig("steps must be >= 1".into()));
        }
        if let DeltaWindow::Finite(w) = self.window {
            if !w.is_finite() || w < 0.0 {
                return Err(CoreError::InvalidConfig(format!(
                    "finite window width must be a nonnegative real, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// The virtual time horizon: one local time per PE plus the step index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub local_times: Vec<f64>,
    pub step_index: u64,
}

impl Horizon {
    /// All PEs enter the simulation with their local times equal to zero.
    pub fn synchronized(n_pes: usize) -> Self {
        Horizon {
            local_times: vec![0.0; n_pes],
            step_index: 0,
        }
    }

    /// Local times drawn i.i.d. uniform on [0, spread).
    ///
    /// The draws use a reserved step index so they can never collide with the
    /// variates consumed during stepping.
    pub fn randomized(n_pes: usize, spread: f64, key: StreamKey) -> Self {
        let local_times = (0..n_pes)
            .map(|k| rng::unit_uniform(PeStepStream::new(key, k as u64, u64::MAX).word(0)) * spread)
            .collect();
        Horizon {
            local_times,
            step_index: 0,
        }
    }

    pub fn n_pes(&self) -> usize {
        self.local_times.len()
    }

    /// The global virtual time: the slowest PE's local time.
    pub fn global_min(&self) -> f64 {
        self.local_times.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Which volume element a PE picked this step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SitePick {
    Interior,
    LeftBorder,
    RightBorder,
    /// The single site of a one-site PE adjoins both neighbors.
    BothBorders,
}

/// Uniform site pick mapped to its border class.
///
/// Site 0 is the left border, site `sites_per_pe - 1` the right border. With
/// one site per PE the pick is deterministic and no word is consumed.
#[inline]
pub fn pick_site(word: u64, sites_per_pe: u64) -> SitePick {
    if sites_per_pe == 1 {
        return SitePick::BothBorders;
    }
    let site = rng::uniform_index(word, sites_per_pe);
    if site == 0 {
        SitePick::LeftBorder
    } else if site == sites_per_pe - 1 {
        SitePick::RightBorder
    } else {
        SitePick::Interior
    }
}

/// Why a PE idled at a step, if it did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaitReason {
    DidNotWait,
    CausalityWait,
    /// Recorded with precedence when both conditions fail.
    WindowWait,
}

/// Per-PE outcome of one parallel update attempt. `pick` is the site class
/// the PE tried to commit this step (its pending event).
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateOutcome {
    pub updated: Vec<bool>,
    pub wait_reason: Vec<WaitReason>,
    pub pick: Vec<SitePick>,
}

impl UpdateOutcome {
    pub fn new(n_pes: usize) -> Self {
        UpdateOutcome {
            updated: vec![false; n_pes],
            wait_reason: vec![WaitReason::DidNotWait; n_pes],
            pick: vec![SitePick::BothBorders; n_pes],
        }
    }

    pub fn updates(&self) -> usize {
        self.updated.iter().filter(|&&u| u).count()
    }
}

/// Pending events: the site a blocked PE is still waiting to commit, or
/// `None` when the next step draws a fresh site.
pub type PendingSites = Vec<Option<SitePick>>;

/// Stream slots consumed per PE per step.
const SITE_SLOT: u64 = 0;
const INCREMENT_SLOT: u64 = 1;

/// Performs one synchronous parallel update attempt.
///
/// Each PE tries to commit its pending event, drawing a fresh site only when
/// the previous attempt succeeded. All decisions are taken against the
/// snapshot of `horizon` at entry; the increments are applied simultaneously
/// and the step index advances by one. Comparisons are non-strict, so exact
/// ties update.
pub fn step(
    horizon: &mut Horizon,
    config: &SimConfig,
    key: StreamKey,
    pending: &mut PendingSites,
    outcome: &mut UpdateOutcome,
) {
    let n = horizon.local_times.len();
    debug_assert_eq!(n, config.n_pes);
    debug_assert_eq!(outcome.updated.len(), n);
    debug_assert_eq!(pending.len(), n);

    let tau = &horizon.local_times;
    let t = horizon.step_index;
    let global_min = horizon.global_min();

    for k in 0..n {
        let pick = match pending[k] {
            Some(held) => held,
            None => {
                if config.sites_per_pe == 1 {
                    SitePick::BothBorders
                } else {
                    let stream = PeStepStream::new(key, k as u64, t);
                    pick_site(stream.word(SITE_SLOT), config.sites_per_pe)
                }
            }
        };

        let window_ok = match config.window {
            DeltaWindow::Unconstrained => true,
            DeltaWindow::Finite(width) => tau[k] <= width + global_min,
        };

        let causality_ok = match config.mode {
            UpdateMode::RandomDeposition => true,
            UpdateMode::Conservative => {
                let left = tau[if k == 0 { n - 1 } else { k - 1 }];
                let right = tau[if k + 1 == n { 0 } else { k + 1 }];
                match pick {
                    SitePick::Interior => true,
                    SitePick::LeftBorder => tau[k] <= left,
                    SitePick::RightBorder => tau[k] <= right,
                    SitePick::BothBorders => tau[k] <= left.min(right),
                }
            }
        };

        let reason = if window_ok && causality_ok {
            WaitReason::DidNotWait
        } else if !window_ok {
            WaitReason::WindowWait
        } else {
            WaitReason::CausalityWait
        };
        outcome.wait_reason[k] = reason;
        outcome.pick[k] = pick;
        let updated = reason == WaitReason::DidNotWait;
        outcome.updated[k] = updated;
        pending[k] = if updated { None } else { Some(pick) };
    }

    for k in 0..n {
        if outcome.updated[k] {
            let eta = rng::unit_exponential(PeStepStream::new(key, k as u64, t).word(INCREMENT_SLOT));
            horizon.local_times[k] += eta;
        }
    }
    horizon.step_index = t + 1;
}

/// One trial: a horizon owned together with its configuration, key, and
/// pending events.
#[derive(Clone, Debug)]
pub struct Trial {
    pub config: SimConfig,
    pub horizon: Horizon,
    pending: PendingSites,
    key: StreamKey,
}

impl Trial {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let horizon = Horizon::synchronized(config.n_pes);
        let key = StreamKey::new(config.seed);
        let pending = vec![None; config.n_pes];
        Ok(Trial {
            config,
            horizon,
            pending,
            key,
        })
    }

    /// Start from local times uniform on [0, spread) instead of zero.
    pub fn with_randomized_start(config: SimConfig, spread: f64) -> Result<Self> {
        config.validate()?;
        if !spread.is_finite() || spread < 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "randomized start spread must be a nonnegative real, got {spread}"
            )));
        }
        let key = StreamKey::new(config.seed);
        let horizon = if spread > 0.0 {
            Horizon::randomized(config.n_pes, spread, key)
        } else {
            Horizon::synchronized(config.n_pes)
        };
        let pending = vec![None; config.n_pes];
        Ok(Trial {
            config,
            horizon,
            pending,
            key,
        })
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn pending(&self) -> &PendingSites {
        &self.pending
    }

    pub fn step(&mut self, outcome: &mut UpdateOutcome) {
        step(&mut self.horizon, &self.config, self.key, &mut self.pending, outcome);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_pes: usize, sites: u64, window: DeltaWindow, mode: UpdateMode) -> SimConfig {
        SimConfig {
            n_pes,
            sites_per_pe: sites,
            window,
            mode,
            steps: 100,
            seed: 1,
        }
    }

    fn horizon_with(times: &[f64]) -> Horizon {
        Horizon {
            local_times: times.to_vec(),
            step_index: 1,
        }
    }

    #[test]
    fn synchronized_start() {
        let h = Horizon::synchronized(4);
        assert_eq!(h.local_times, vec![0.0; 4]);
        assert_eq!(h.step_index, 0);
        let h1 = Horizon::synchronized(1);
        assert_eq!(h1.local_times, vec![0.0]);
    }

    #[test]
    fn randomized_start_within_spread() {
        let h = Horizon::randomized(100, 1.0, StreamKey::new(3));
        assert_eq!(h.step_index, 0);
        assert!(h.local_times.iter().all(|&t| (0.0..1.0).contains(&t)));
        // Not all equal.
        assert!(h.local_times.iter().any(|&t| t != h.local_times[0]));
    }

    #[test]
    fn global_min_examples() {
        assert_eq!(horizon_with(&[3.0, 1.0, 2.0]).global_min(), 1.0);
        assert_eq!(Horizon::synchronized(5).global_min(), 0.0);
    }

    #[test]
    fn pick_site_single_site_is_both_borders() {
        for w in [0u64, 1, u64::MAX] {
            assert_eq!(pick_site(w, 1), SitePick::BothBorders);
        }
    }

    #[test]
    fn pick_site_two_sites_never_interior() {
        let key = StreamKey::new(11);
        let mut left = 0u32;
        for i in 0..100_000u64 {
            match pick_site(PeStepStream::new(key, 0, i).word(0), 2) {
                SitePick::LeftBorder => left += 1,
                SitePick::RightBorder => {}
                other => panic!("unexpected pick {other:?}"),
            }
        }
        // Each border should come up about half the time.
        assert!((left as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn pick_site_interior_frequency() {
        let key = StreamKey::new(12);
        let n = 100_000u64;
        let mut interior = 0u32;
        for i in 0..n {
            if pick_site(PeStepStream::new(key, 0, i).word(0), 100) == SitePick::Interior {
                interior += 1;
            }
        }
        let freq = interior as f64 / n as f64;
        assert!((freq - 0.98).abs() < 0.005, "interior frequency {freq}");
    }

    #[test]
    fn step_only_local_minimum_advances() {
        let cfg = config(3, 1, DeltaWindow::Unconstrained, UpdateMode::Conservative);
        let mut h = horizon_with(&[0.5, 1.0, 2.0]);
        let mut out = UpdateOutcome::new(3);
        let mut pending = vec![None; 3];
        step(&mut h, &cfg, StreamKey::new(5), &mut pending, &mut out);
        assert_eq!(out.updated, vec![true, false, false]);
        assert_eq!(out.wait_reason[1], WaitReason::CausalityWait);
        assert_eq!(out.wait_reason[2], WaitReason::CausalityWait);
        assert!(h.local_times[0] > 0.5);
        assert_eq!(h.local_times[1], 1.0);
        assert_eq!(h.local_times[2], 2.0);
        assert_eq!(h.step_index, 2);
    }

    #[test]
    fn ties_update_everywhere() {
        let cfg = config(6, 1, DeltaWindow::Finite(2.0), UpdateMode::Conservative);
        let mut h = Horizon::synchronized(6);
        let mut out = UpdateOutcome::new(6);
        let mut pending = vec![None; 6];
        step(&mut h, &cfg, StreamKey::new(6), &mut pending, &mut out);
        assert!(out.updated.iter().all(|&u| u));
    }

    #[test]
    fn zero_window_only_global_minimum_advances() {
        let cfg = config(3, 1, DeltaWindow::Finite(0.0), UpdateMode::Conservative);
        let mut h = horizon_with(&[0.5, 1.0, 2.0]);
        let mut out = UpdateOutcome::new(3);
        let mut pending = vec![None; 3];
        step(&mut h, &cfg, StreamKey::new(7), &mut pending, &mut out);
        assert_eq!(out.updated, vec![true, false, false]);
    }

    #[test]
    fn window_wait_takes_precedence() {
        // PE 1 fails both causality (5 > 0) and the zero window; the recorded
        // reason must be the window.
        let cfg = config(3, 1, DeltaWindow::Finite(0.0), UpdateMode::Conservative);
        let mut h = horizon_with(&[0.0, 5.0, 10.0]);
        let mut out = UpdateOutcome::new(3);
        let mut pending = vec![None; 3];
        step(&mut h, &cfg, StreamKey::new(8), &mut pending, &mut out);
        assert_eq!(out.wait_reason[1], WaitReason::WindowWait);
        assert_eq!(out.wait_reason[2], WaitReason::WindowWait);
    }

    #[test]
    fn random_deposition_unconstrained_all_update() {
        let cfg = config(5, 1, DeltaWindow::Unconstrained, UpdateMode::RandomDeposition);
        let mut h = horizon_with(&[0.0, 9.0, 1.0, 7.0, 3.0]);
        let mut out = UpdateOutcome::new(5);
        let mut pending = vec![None; 5];
        step(&mut h, &cfg, StreamKey::new(9), &mut pending, &mut out);
        assert!(out.updated.iter().all(|&u| u));
    }

    #[test]
    fn single_pe_always_updates_unconstrained() {
        let cfg = config(1, 1, DeltaWindow::Unconstrained, UpdateMode::Conservative);
        let mut trial = Trial::new(cfg).unwrap();
        let mut out = UpdateOutcome::new(1);
        for _ in 0..50 {
            trial.step(&mut out);
            assert!(out.updated[0]);
        }
        assert!(trial.horizon.local_times[0] > 0.0);
    }

    #[test]
    fn unconstrained_equals_huge_window() {
        let base = config(50, 2, DeltaWindow::Unconstrained, UpdateMode::Conservative);
        let mut a = Trial::new(base.clone()).unwrap();
        let mut b = Trial::new(SimConfig {
            window: DeltaWindow::Finite(1e9),
            ..base
        })
        .unwrap();
        let mut out = UpdateOutcome::new(50);
        for _ in 0..200 {
            a.step(&mut out);
            b.step(&mut out);
        }
        assert_eq!(a.horizon.local_times, b.horizon.local_times);
    }

    #[test]
    fn identical_seed_identical_trajectory() {
        let cfg = config(32, 3, DeltaWindow::Finite(4.0), UpdateMode::Conservative);
        let run = |cfg: &SimConfig| {
            let mut trial = Trial::new(cfg.clone()).unwrap();
            let mut out = UpdateOutcome::new(cfg.n_pes);
            for _ in 0..100 {
                trial.step(&mut out);
            }
            trial.horizon.local_times
        };
        assert_eq!(run(&cfg), run(&cfg));
        let other = SimConfig { seed: 2, ..cfg.clone() };
        assert_ne!(run(&cfg), run(&other));
    }

    #[test]
    fn random_deposition_times_sum_of_exponentials() {
        let cfg = SimConfig {
            n_pes: 100,
            sites_per_pe: 1,
            window: DeltaWindow::Unconstrained,
            mode: UpdateMode::RandomDeposition,
            steps: 10_000,
            seed: 77,
        };
        let mut trial = Trial::new(cfg).unwrap();
        let mut out = UpdateOutcome::new(100);
        for _ in 0..10_000 {
            trial.step(&mut out);
            assert_eq!(out.updates(), 100);
        }
        let t = trial.horizon.step_index as f64;
        let mean: f64 = trial.horizon.local_times.iter().sum::<f64>() / 100.0 / t;
        // Per-PE tau/t has std 1/sqrt(t) = 0.01; the mean over 100 independent
        // PEs has std 1e-3.
        assert!((mean - 1.0).abs() < 5e-3, "tau/t = {mean}");
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(SimConfig {
            n_pes: 0,
            sites_per_pe: 1,
            window: DeltaWindow::Unconstrained,
            mode: UpdateMode::Conservative,
            steps: 1,
            seed: 0,
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            n_pes: 1,
            sites_per_pe: 1,
            window: DeltaWindow::Finite(-1.0),
            mode: UpdateMode::Conservative,
            steps: 1,
            seed: 0,
        }
        .validate()
        .is_err());
    }
}
