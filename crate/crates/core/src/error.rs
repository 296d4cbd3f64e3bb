use thiserror::Error;

use crate::quad::QuadError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("sample set is empty")]
    EmptySample,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unstable fractional derivative: {0}")]
    Unstable(String),
    #[error("condition check failed: {0}")]
    ConditionFailed(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
