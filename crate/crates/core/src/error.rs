use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite value encountered while evaluating {0}")]
    NonFinite(&'static str),

    #[error("optimizer step failed: {0}")]
    Step(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset has {0} distinct labels; only binary datasets are supported")]
    TooManyLabels(usize),

    #[error("fetch failed for {name}: {msg}")]
    Fetch { name: String, msg: String },

    #[error("integrity check failed for {path}: expected sha256 {expected}, got {got}")]
    Integrity {
        path: PathBuf,
        expected: String,
        got: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
