use thiserror::Error;

pub type Result<T> = std::result::Result<T, CscError>;

#[derive(Debug, Error)]
pub enum CscError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index out of range: {0}")]
    Index(String),

    /// A message broke the neighbor-only communication contract.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("worker {worker} failed: {reason}")]
    WorkerFailure { worker: usize, reason: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CscError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        CscError::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CscError::Config(msg.into())
    }
}
