use thiserror::Error;

/// Errors raised by the numerical core and the orchestration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("assumption veto: {0}")]
    AssumptionVeto(String),

    #[error("exponent overflow guard: |Re M| reached {max_re_m} (limit 700)")]
    Overflow { max_re_m: f64 },

    #[error("numerical abort at time index {index}: {reason}")]
    NumericalAbort { index: usize, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Json(_)
            | Error::Grid(_)
            | Error::GridMismatch(_)
            | Error::InvalidArgument { .. } => 2,
            Error::AssumptionVeto(_) => 3,
            Error::NumericalAbort { .. } | Error::Overflow { .. } => 4,
            Error::Io { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
