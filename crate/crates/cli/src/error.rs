use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dpcrm::Error),

    /// Missing or contradictory flags.
    #[error("{0}")]
    Usage(String),

    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },

    /// A previous run's outputs are absent or unreadable.
    #[error("{0}")]
    MissingArtifact(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                dpcrm::Error::Domain(_) | dpcrm::Error::Validation(_) => EXIT_VALIDATION,
                dpcrm::Error::Numeric { .. } | dpcrm::Error::Resource { .. } => EXIT_NUMERIC,
                dpcrm::Error::Parse { .. } | dpcrm::Error::Io(_) => EXIT_IO,
            },
            CliError::Usage(_) | CliError::Config { .. } | CliError::MissingArtifact(_) => {
                EXIT_VALIDATION
            }
            CliError::Io { .. } => EXIT_IO,
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
