use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    /// Unexpected numerical failure inside the library (e.g. SVD did not converge).
    pub const INTERNAL: u8 = 1;
    /// Unreadable or malformed input file, unwritable output, or bad flags.
    pub const IO: u8 = 2;
    pub const SHAPE: u8 = 3;
    pub const RANK_DEFICIENT: u8 = 4;
    pub const RANK_TOO_LARGE: u8 = 5;
    pub const SOUNDNESS: u8 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error("{}: {msg}", path.display())]
    Shape { path: PathBuf, msg: String },
    #[error("{}: reference block has numerical rank {rank} < target rank {required}", path.display())]
    RankDeficient {
        path: PathBuf,
        rank: usize,
        required: usize,
    },
    #[error("rank {rank} exceeds the maximum {max}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    RankTooLarge {
        rank: usize,
        max: usize,
        context: Option<String>,
    },
    #[error("internal numerical failure: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Usage(_) => exit::IO,
            CliError::Shape { .. } => exit::SHAPE,
            CliError::RankDeficient { .. } => exit::RANK_DEFICIENT,
            CliError::RankTooLarge { .. } => exit::RANK_TOO_LARGE,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
