use std::io;
use std::path::PathBuf;

use collabtrack_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Format(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 data or format, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Io { .. } | AppError::Format(_) => 2,
            AppError::Numeric(_) => 3,
            AppError::Core(e) => match e {
                CoreError::InvalidConfig(_) => 1,
                CoreError::Numeric(_) => 3,
                _ => 2,
            },
        }
    }
}
