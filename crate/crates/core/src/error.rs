use thiserror::Error;

/// Errors raised by the numerical and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("numeric accuracy not reached: estimated error {estimate:e} exceeds {tolerance:e} ({context})")]
    Accuracy {
        estimate: f64,
        tolerance: f64,
        context: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation at a singularity of the spectral density")]
    Pole,

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("covariance is not positive semidefinite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("assumption check failed: {message}; measured ratios {ratios:?}")]
    AssumptionCheck { message: String, ratios: Vec<f64> },

    #[error("oracle grid too coarse: normalization changes by {discrepancy:.4} under refinement (limit 0.05)")]
    Resolution { discrepancy: f64 },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
