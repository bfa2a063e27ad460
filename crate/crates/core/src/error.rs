use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("zero vector where a direction is required")]
    ZeroVector,
    #[error("angle {0} outside (0, pi/2)")]
    InvalidAngle(f64),
    #[error("method {method} cannot estimate V_{ell} in dimension {dim}")]
    MethodMismatch {
        method: &'static str,
        ell: usize,
        dim: usize,
    },
    #[error("rejection sampler exhausted its budget of {0} proposals")]
    RejectionBudgetExceeded(u64),
    #[error("n = {0} is too small (need n >= 3)")]
    InvalidN(u64),
    #[error("construction failure: {0}")]
    ConstructionFailure(String),
    #[error("non-positive value {0} in a log-log fit")]
    NonPositiveValue(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample has zero spread")]
    DegenerateSample,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
