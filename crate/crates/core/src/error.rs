//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed row: {msg}")]
    MalformedRow { path: String, line: u64, msg: String },

    #[error("{path}: no data rows")]
    EmptyFile { path: String },

    #[error("{path}: header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        path: String,
        expected: String,
        found: String,
    },

    #[error("signal `{signal}` carries no quality scores")]
    MissingQuality { signal: &'static str },

    #[error("series invariant violated: {0}")]
    InvalidSeries(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series have no temporal overlap")]
    NoOverlap,

    #[error("epoch grids are incompatible: {0}")]
    GridMismatch(String),

    #[error("constant series: {0}")]
    ConstantSeries(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
