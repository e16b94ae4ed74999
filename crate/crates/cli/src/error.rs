use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] drcn_core::Error),

    #[error("invalid sweep: {0}")]
    Spec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("reference data: {0}")]
    Reference(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 for bad input, 3 for I/O and data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) | CliError::Spec(_) => 1,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Reference(_) => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
