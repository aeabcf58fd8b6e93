use std::path::PathBuf;

/// Errors surfaced by the library. Config problems are separated from
/// runtime failures so the CLI can map them to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum HavtError {
    #[error("config error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: String, value: f64 },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, HavtError>;

impl HavtError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HavtError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HavtError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, HavtError::Config(_))
    }
}
