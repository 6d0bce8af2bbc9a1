//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for parsing, validation, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// File could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed JSON; the message carries line/column from the parser.
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// Structurally valid JSON that violates the schema (unknown ids,
    /// degenerate boxes, out-of-range scores, ...).
    #[error("schema error: {0}")]
    Schema(String),

    /// A caller or internal invariant was violated. Maps to exit code 2
    /// in the CLI; the message names the violated invariant.
    #[error("invariant violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors caused by bad input rather than an internal bug.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Contract(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
