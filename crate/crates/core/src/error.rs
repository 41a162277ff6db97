use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("input spans no directions")]
    EmptyBasis,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("no strictly feasible step of length at least {min_step:e}")]
    StepFailure { min_step: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("state fingerprint does not match the problem: {0}")]
    FingerprintMismatch(String),

    #[error("malformed state file: {0}")]
    StateFormat(String),

    #[error("index mapping out of range: {0}")]
    Mapping(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
