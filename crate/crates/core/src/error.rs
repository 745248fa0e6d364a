use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate weights: every weight is zero")]
    DegenerateWeights,

    #[error("degenerate inner weights at iteration {iteration}")]
    DegenerateInnerWeights { iteration: usize },

    #[error("degenerate weights at iteration {iteration}")]
    DegenerateIterationWeights { iteration: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("auxiliary density is zero at a drawn sample (support condition violated)")]
    SupportViolation,

    #[error("mixture denominator is zero at particle {index}")]
    ZeroDenominator { index: usize },

    #[error("kernel matrix is ill-conditioned even with maximum jitter")]
    IllConditioned,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside the model domain")]
    OutOfDomain,

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
