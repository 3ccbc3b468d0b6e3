use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document. `line` is 1-based when known.
    #[error("parse error{}: {field}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    /// Corpus record violates the JSONL schema. `record` is 1-based.
    #[error("record {record}: {message}")]
    Schema { record: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch{}: {left} vs {right}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    LengthMismatch {
        left: usize,
        right: usize,
        context: Option<String>,
    },

    #[error("utterance {id}: {message}")]
    Truncation { id: String, message: String },

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch}: L_emo={l_emo} L_pp={l_pp}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        l_emo: f64,
        l_pp: f64,
    },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
