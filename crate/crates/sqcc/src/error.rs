use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] sqcc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: malformed {kind}: {msg}")]
    Format {
        path: PathBuf,
        kind: &'static str,
        msg: String,
    },
    #[error("class mismatch: {0}")]
    ClassMismatch(String),
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("output directory {0} is locked by another run")]
    Busy(PathBuf),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            kind,
            msg: msg.into(),
        }
    }

    /// Process exit status for the CLI; every variant gets its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(_) => 10,
            Error::Io { .. } => 3,
            Error::Config(_) => 9,
            Error::Format { .. } => 4,
            Error::ClassMismatch(_) => 5,
            Error::ParamMismatch(_) => 6,
            Error::Precondition(_) => 7,
            Error::Busy(_) => 8,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
