use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("soft-scattering regime violated: max k*dx = {score} exceeds {limit}")]
    Regime { score: f64, limit: f64 },
    #[error("shell unitary calibration failed at node {node}: diagonal mismatch {mismatch:e}")]
    Calibration { node: usize, mismatch: f64 },
    #[error("capacity exceeded: {what} needs dimension {needed}, cap is {cap} (reduce {limiting})")]
    Capacity {
        what: String,
        needed: u128,
        cap: usize,
        limiting: String,
    },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("theorem bound violated: minimum slack {min_slack:e}")]
    BoundViolation { min_slack: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 2,
            Error::BoundViolation { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
