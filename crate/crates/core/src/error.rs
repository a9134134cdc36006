use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky pivot fell below the relative threshold.
    #[error("matrix is singular or not positive definite (pivot {pivot:e} at index {index})")]
    SingularMatrix { index: usize, pivot: f64 },

    /// The CCI-plus-noise covariance estimate has no usable energy.
    #[error("degenerate covariance estimate: {0}")]
    DegenerateEstimate(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error(transparent)]
    Config(#[from] crate::harness::config::ConfigError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
