use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` has not been run; run it first")]
    MissingStage { stage: String },
    #[error("stage `{stage}` was recorded with different settings ({detail}); rerun with --force")]
    ConfigMismatch { stage: String, detail: String },
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Core(#[from] reasonrank_core::Error),
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("offline cache miss for key {0}")]
    OfflineCacheMiss(String),
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("missing credential: set REASONRANK_API_KEY")]
    MissingCredential,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache: {0}")]
    Cache(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 2 for validation problems, 3 for gateway failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Gateway(_) => 3,
            Error::Parse { .. }
            | Error::Config(_)
            | Error::MissingStage { .. }
            | Error::ConfigMismatch { .. }
            | Error::Core(_) => 2,
            Error::Io { .. } | Error::Format(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
