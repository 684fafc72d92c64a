//! Error types shared across the crate.

use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A data-rate identifier outside the modeled set.
    #[error("unsupported data rate DR{0}: only DR8 and DR9 are supported")]
    UnsupportedDataRate(u8),

    /// A replication-scheme name that is not in the registry.
    #[error("unknown replication scheme '{0}' (known schemes: none, frame, fragment)")]
    UnknownScheme(String),

    /// A parameter violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A dataset is missing rows a consumer requires.
    #[error("incomplete data: {0}")]
    IncompleteData(String),

    /// Generic I/O failure.
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// I/O failure while streaming CSV rows; reports how many complete rows
    /// made it out before the failure.
    #[error("CSV write failed after {rows_written} data rows: {source}")]
    CsvWrite {
        source: io::Error,
        rows_written: usize,
    },

    /// JSON configuration could not be parsed.
    #[error("configuration error: {0}")]
    Config(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
