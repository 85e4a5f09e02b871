use thiserror::Error;

/// Errors produced by the hashing toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch: {detail}")]
    DimMismatch { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: malformed row: {detail}")]
    MalformedRow {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("sample {sample}: label {label} out of range for {k} classes")]
    LabelOutOfRange {
        sample: usize,
        label: usize,
        k: usize,
    },

    #[error("row count mismatch: {features} feature rows, {labels} label rows")]
    RowCountMismatch { features: usize, labels: usize },

    #[error("{path}: bad format: {detail}")]
    BadFormat { path: String, detail: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimMismatch {
            op,
            detail: detail.into(),
        }
    }
}
