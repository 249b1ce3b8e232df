use thiserror::Error;

use sth_core::CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Precondition(String),

    #[error("resource guard: {0}")]
    Resource(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit code for this error: 2 precondition, 3 resource,
    /// 4 fit/evaluation, 5 i/o.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Precondition(_) | CliError::Parse { .. } => 2,
            CliError::Resource(_) => 3,
            CliError::Core(core) => match core {
                CoreError::InvalidConfig(_)
                | CoreError::InsufficientData(_)
                | CoreError::Domain(_) => 2,
                CoreError::FitFailed(_)
                | CoreError::PoisonedFit(_)
                | CoreError::NotSaturated(_)
                | CoreError::Evaluation(_) => 4,
            },
            CliError::Io { .. } | CliError::Json(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
