use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("qubit count {n} exceeds the dense cap {cap}")]
    DenseCap { n: usize, cap: usize },
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("evolution time {requested} is below the minimum time {minimum}")]
    MinimumTimeViolation { requested: f64, minimum: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
