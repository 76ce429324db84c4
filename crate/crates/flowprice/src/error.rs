use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input {path}: {reason}")]
    MissingInput { path: PathBuf, reason: String },
    #[error("{0}")]
    BadParameters(String),
    #[error("{file}:{line}: {reason}")]
    Validation { file: String, line: u64, reason: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput { .. } => 1,
            CliError::BadParameters(_) => 2,
            CliError::Validation { .. } | CliError::Data(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn bad(msg: impl Into<String>) -> Self {
        CliError::BadParameters(msg.into())
    }
}

/// Core errors raised while evaluating user-supplied parameters.
impl From<flowprice_core::Error> for CliError {
    fn from(e: flowprice_core::Error) -> Self {
        CliError::BadParameters(e.to_string())
    }
}
