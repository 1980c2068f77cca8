use std::path::PathBuf;

use label_bridge_core::dataset::ProviderError;
use label_bridge_core::scoring::ScoreError;

/// Errors surfaced by the pipeline, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("{path}: missing input artifact; run `label-bridge {producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },
    #[error("{0}")]
    Data(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Provider(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::MissingArtifact { .. } | Error::Data(_) | Error::Parse { .. } | Error::Io { .. } => 2,
            Error::Provider(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        Error::Data(msg.to_string())
    }
}

impl From<ProviderError> for Error {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Unavailable(_) => Error::Provider(e.to_string()),
            other => Error::Data(other.to_string()),
        }
    }
}

impl From<ScoreError> for Error {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::Provider(p) => p.into(),
            other => Error::Data(other.to_string()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
