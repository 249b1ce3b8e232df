//! Simulation and analysis of the virtual time horizon of conservative
//! parallel discrete-event simulations on a ring, with an optional moving
//! window constraint tied to the global virtual time.
//!
//! The crate provides:
//! - the exact per-step update rules (conservative, window-constrained, and
//!   random-deposition variants) with counter-based random streams that make
//!   every trajectory reproducible under any parallel schedule;
//! - per-step and ensemble statistics of the horizon (utilization, surface
//!   widths, extremes, slow/fast decomposition);
//! - scaling analysis: growth and roughness exponents, crossover steps, and
//!   finite-size extrapolations of the utilization;
//! - closed-form utilization models with published constants, mean-field
//!   waiting counters, and refitting.

pub mod ensemble;
pub mod error;
pub mod fits;
pub mod horizon;
mod linalg;
pub mod lm;
pub mod rng;
pub mod scaling;
pub mod stats;

pub use ensemble::{
    aggregate, plateau_entry_step, recorded_steps, run_ensemble, steady_state_mean, CellConfig,
    EnsembleSeries, EnsembleSpec, StatSeries, StatSummary, SteadyState,
};
pub use error::{CoreError, Result};
pub use fits::{
    eval_composite, eval_p, eval_u_kpz, eval_u_rd, mean_field_u, published_params,
    published_two_point_params, refit_params, CorrectionPair, CounterAccumulator, FitObservation,
    FitParams, LoadRegime, MeanFieldCounters, MeanFieldRegime, RefitOutcome,
};
pub use horizon::{
    pick_site, step, DeltaWindow, Horizon, SimConfig, SitePick, Trial, UpdateMode, UpdateOutcome,
    WaitReason,
};
pub use scaling::{
    crossover_time, growth_exponent, krug_meakin_extrapolate, rational_extrapolate,
    rational_interpolate_at, rational_interpolate_at_zero, roughness_exponent, Extrapolation,
    ExtrapolationMethod, ExponentFit, SaturatedWidth, ScalingResult, UtilizationPoint,
};
pub use stats::{
    slow_fast_decompose, step_stats, GroupDecomposition, StatId, StepRecord, StepStats,
};
