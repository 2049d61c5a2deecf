use thiserror::Error;

#[derive(Debug, Error)]
pub enum RgpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// NaN/inf in a loss, gradient or transport plan.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RgpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> RgpError {
    RgpError::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> RgpError {
    RgpError::DimensionMismatch(msg.into())
}
