use std::path::PathBuf;

use thiserror::Error;

/// A subject metadata field outside its accepted range.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {field}: {reason}")]
pub struct MetaError {
    pub field: &'static str,
    pub reason: String,
}

impl MetaError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("malformed header at line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("expected 500 data rows, found {0}")]
    WrongRowCount(usize),
    #[error("malformed data row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("non-finite sample in channel {channel} at row {row}")]
    NonFiniteSample { channel: &'static str, row: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    InvalidMeta(#[from] MetaError),
    #[error("file is not valid UTF-8")]
    NotUtf8,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no valid recordings under {0}")]
    EmptyDataset(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("recording {session_id} is invalid: {violations:?}")]
    InvalidRecording {
        session_id: String,
        violations: Vec<String>,
    },
}
