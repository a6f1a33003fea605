use thiserror::Error;

/// Errors raised by every layer of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlqrError {
    #[error("quantile level must lie strictly inside (0, 1), got {0}")]
    InvalidQuantile(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("not enough observations: {used} usable rows for {params} parameters")]
    InsufficientObservations { used: usize, params: usize },
    #[error("penalty level must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("invalid penalty weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("first-stage quantile regression did not reach an optimal solution ({0})")]
    FirstStageFailed(String),
    #[error("tuning failed at every grid point: {0}")]
    TuningFailed(String),
    #[error("degenerate quantity: {0}")]
    Degenerate(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("too many failed replications: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
}

impl From<std::io::Error> for AlqrError {
    fn from(e: std::io::Error) -> Self {
        AlqrError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for AlqrError {
    fn from(e: serde_json::Error) -> Self {
        AlqrError::Config(e.to_string())
    }
}

pub type Result<T, E = AlqrError> = std::result::Result<T, E>;
