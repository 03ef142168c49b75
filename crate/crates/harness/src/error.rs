use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rknn_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
}

impl HarnessError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 3 for configuration and invariant violations, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Core(rknn_core::Error::Io(_)) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
