use std::path::PathBuf;

/// Exit status for bad input: unreadable files, malformed CSV, invalid flags.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when the numerics fail (not PD, no convergence).
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] eagl_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(eagl_core::Error::NotPositiveDefinite { .. } | eagl_core::Error::NoConvergence { .. }) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_INPUT,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
