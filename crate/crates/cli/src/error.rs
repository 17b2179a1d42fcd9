use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("design manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("sequence file {path}: {message}")]
    SequenceFile { path: PathBuf, message: String },

    #[error("scenario {scenario}: solver failed: {source}")]
    Solver {
        scenario: String,
        #[source]
        source: wrtr_core::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } | CliError::Manifest { .. } | CliError::SequenceFile { .. } => {
                2
            }
            CliError::Solver { .. } => 3,
        }
    }

    pub(crate) fn config(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
