use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of a log-ratio operation.
    #[error("domain error at row {row}, column {col}: {msg}")]
    Domain { row: usize, col: usize, msg: String },

    #[error("domain error: {0}")]
    DomainValue(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("malformed input {path}: {msg}")]
    Input { path: String, msg: String },

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(row: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Domain {
            row,
            col,
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// Validation and input problems map to 2, everything else to 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
