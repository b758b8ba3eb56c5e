use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(#[from] vqpde_core::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 optimization failure, 2 configuration problem, 3 failed oracles.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Core(vqpde_core::Error::OptimizationFailed { .. }) => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}
