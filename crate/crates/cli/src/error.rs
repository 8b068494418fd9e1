use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String },

    #[error(transparent)]
    Core(#[from] diotm_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 usage, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::Diverged { .. } => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 3,
            CliError::Core(e) => match e {
                diotm_core::Error::Diverged { .. } => 2,
                diotm_core::Error::Io(_) => 3,
                _ => 1,
            },
        }
    }
}
