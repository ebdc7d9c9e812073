use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power iteration hit the zero vector after {restarts} restarts")]
    ZeroVector { restarts: usize },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("singular system: smallest pivot {pivot:e} at index {index} after ridge")]
    Singular { index: usize, pivot: f64 },

    #[error("singular value decomposition did not converge")]
    SvdFailure,

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("step failure: {0}")]
    StepFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
