use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for '{key}': {message}")]
    Usage { key: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Clap(#[from] clap::Error),

    #[error(transparent)]
    Sim(#[from] ddsim_core::Error),
}

impl CliError {
    pub fn usage(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Usage {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
