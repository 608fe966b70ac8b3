use thiserror::Error;

/// Errors raised when inputs violate a documented precondition.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LumError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite argument: {0}")]
    NonFinite(&'static str),
    #[error("probability {value} for {what} is outside [0, 1]")]
    InvalidProbability { what: &'static str, value: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shape mismatch for {what}: got {got}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("noise condition not satisfied: {0}")]
    NoiseConditionFailed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LumError>;

impl From<std::io::Error> for LumError {
    fn from(e: std::io::Error) -> Self {
        LumError::Io(e.to_string())
    }
}

impl From<csv::Error> for LumError {
    fn from(e: csv::Error) -> Self {
        LumError::Format(e.to_string())
    }
}

impl From<serde_json::Error> for LumError {
    fn from(e: serde_json::Error) -> Self {
        LumError::Format(e.to_string())
    }
}
