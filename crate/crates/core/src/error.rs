use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required column is absent from the header row.
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    /// A data row violates the record contract. `row` is the 0-based data row index.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("CSV parse error at byte offset {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// The input has no words (or otherwise cannot be scored).
    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenRange { id: u32, vocab_size: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
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
