use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] kimura::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid output row: {0}")]
    InvalidRow(String),
    #[error("acceptance criteria failed: {}", .0.join(", "))]
    CriteriaFailed(Vec<String>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 0 success, 1 validation, 2 divergence, 3 criterion failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::InvalidRow(_) => 1,
            Self::Solver(kimura::Error::Divergence { .. }) | Self::Solver(kimura::Error::LinearSolve(_)) => 2,
            Self::Solver(_) => 1,
            Self::CriteriaFailed(_) => 3,
            Self::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
