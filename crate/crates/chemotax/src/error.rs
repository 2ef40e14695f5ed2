use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Numerical(#[from] chemotax_core::Error),

    /// A run that produced (possibly partial) output but did not finish.
    #[error("{0}")]
    Aborted(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// 2 for usage and configuration problems, 1 for everything that went
    /// wrong while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::ReadConfig { .. } => 2,
            CliError::Write { .. } | CliError::Numerical(_) | CliError::Aborted(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
