use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("incomplete run log in {path}: {message}")]
    IncompleteLog { path: PathBuf, message: String },

    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] subnav_core::Error),
}

impl CliError {
    /// 1 for bad input, 2 for anything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 1,
            CliError::Core(subnav_core::Error::InvalidConfig(_))
            | CliError::Core(subnav_core::Error::UnknownCourse(_))
            | CliError::Core(subnav_core::Error::InvalidCourse(_))
            | CliError::Core(subnav_core::Error::InvalidTable(_))
            | CliError::Core(subnav_core::Error::EmptyTable) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Csv {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
