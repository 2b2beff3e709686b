use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::formats::FormatError;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: io::Error },

    #[error("{}: {error}", path.display())]
    Format { path: PathBuf, error: FormatError },

    #[error("{}: {error}", path.display())]
    Data { path: PathBuf, error: sparserec::Error },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sparserec::Error),
}

impl CliError {
    pub fn io(path: &Path, error: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            error,
        }
    }

    pub fn format(path: &Path, error: FormatError) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            error,
        }
    }

    pub fn data(path: &Path, error: sparserec::Error) -> Self {
        CliError::Data {
            path: path.to_path_buf(),
            error,
        }
    }
}
