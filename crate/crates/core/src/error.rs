use thiserror::Error;

/// Errors produced across the decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("rank-deficient covariance: {0}")]
    RankDeficient(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("unsupported archive layout: {0}")]
    UnsupportedLayout(String),

    #[error("malformed file {path}: {detail}")]
    Malformed { path: String, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
