use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] gridstab_core::Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const PARTIAL: i32 = 4;
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Validation problems map to 2, numerical ones to 3.
    pub fn exit_code(&self) -> i32 {
        use gridstab_core::Error as C;
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Core(
                C::PowerFlowDiverged { .. }
                | C::Singular(_)
                | C::EigenFailure
                | C::ZeroMode { .. }
                | C::NoInteriorMinimum { .. }
                | C::AllDrawsFailed { .. },
            ) => exit::NUMERICAL,
            _ => exit::VALIDATION,
        }
    }
}
