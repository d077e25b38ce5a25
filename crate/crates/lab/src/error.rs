use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad flags, config file or experiment settings.
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input file content.
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    /// A training or evaluation cell failed.
    #[error("{cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: brelu_core::Error,
    },
    #[error(transparent)]
    Core(#[from] brelu_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn config(message: impl Into<String>) -> Self {
        LabError::Config(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for usage and config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
