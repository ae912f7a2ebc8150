//! Error type shared by every component in the crate.

use thiserror::Error;

/// Errors raised while ingesting data, fitting models, or running protocols.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv parse error at data row {row}, column '{column}': {message}")]
    CsvParse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing target column '{0}' in csv header")]
    MissingTargetColumn(String),

    #[error("csv read error: {0}")]
    CsvRead(#[from] csv::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
