//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data; names the line and field when known.
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: u64,
        field: &'static str,
        message: String,
    },

    /// A parameter outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Not enough data to carry out the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Mismatch between a trained model and the requested run settings.
    #[error("model/config mismatch: {0}")]
    ModelMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: u64, field: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field,
            message: message.into(),
        }
    }
}
