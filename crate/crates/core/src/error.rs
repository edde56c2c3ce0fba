use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("backward called on a tape with no recorded forward pass")]
    NoForwardPass,

    #[error("power normalization of an all-zero codeword (row {row})")]
    DegenerateCodeword { row: usize },

    #[error("non-finite {what} at epoch {epoch}, iteration {iteration} ({schedule})")]
    Diverged {
        what: &'static str,
        epoch: usize,
        iteration: usize,
        schedule: String,
    },

    #[error("non-finite gradient passed to the optimizer")]
    NonFiniteGradient,

    #[error("inconsistent sub-batch sizes: expected {expected}, got {actual}")]
    SubBatchSize { expected: usize, actual: usize },

    #[error("SNR {0} dB is not part of the validation grid")]
    SnrNotInGrid(f64),

    #[error("message length {k} too large for exhaustive enumeration (limit {limit})")]
    TooLargeToEnumerate { k: usize, limit: usize },

    #[error("bad checkpoint magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error("checkpoint payload has {actual} bytes, expected {expected}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("checkpoint header is malformed: {0}")]
    HeaderParse(String),

    #[error("checkpoint dimensions disagree with the header: {0}")]
    DimMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
