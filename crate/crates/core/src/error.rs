use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("series not saturated: {0}")]
    NotSaturated(String),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("rational fit has a pole inside the extrapolation interval: {0}")]
    PoisonedFit(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
