use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Model(sysrisk::Error),

    /// The solver stopped short; partial output has been written.
    #[error("{0}")]
    NonConvergence(String),

    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Model(e) => match e {
                sysrisk::Error::Syntax { .. } | sysrisk::Error::Config { .. } => 2,
                sysrisk::Error::NonConvergence(_) | sysrisk::Error::Continuation { .. } => 3,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}

impl From<sysrisk::Error> for CliError {
    fn from(e: sysrisk::Error) -> Self {
        CliError::Model(e)
    }
}
