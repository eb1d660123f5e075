use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step size {step} outside (0, 1/L) with L = {lipschitz}")]
    InvalidStep { step: f64, lipschitz: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("index {k} out of range for trace with {len} records")]
    OutOfRange { k: usize, len: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("trace too short: need at least {needed} records, have {have}")]
    TraceTooShort { needed: usize, have: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
