use thiserror::Error;

/// Errors surfaced by the simulator, learners and experiment runner.
#[derive(Debug, Error)]
pub enum QasError {
    /// Invalid configuration value (bad qubit count, odd Schwinger size, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// API misuse: index out of range, dimension mismatch, wrong parameter count.
    #[error("usage error: {0}")]
    Usage(String),
    /// An iterative numerical method failed to converge.
    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },
    /// A quantity left its mathematical domain (e.g. degenerate spectrum).
    #[error("domain error: {0}")]
    Domain(String),
    /// Non-finite loss or gradient during training.
    #[error("training error: {0}")]
    Training(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = QasError> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(QasError::Usage(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(QasError::Config(msg.into()))
}
