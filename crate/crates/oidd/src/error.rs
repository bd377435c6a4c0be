use std::path::PathBuf;

use thiserror::Error;

use crate::tensorio::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Tensor {
        path: PathBuf,
        #[source]
        source: TensorError,
    },
    #[error(transparent)]
    Core(#[from] oidd_core::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unknown detector `{0}` (expected bls, ods, ssim, baseline or odin)")]
    UnknownDetector(String),
    #[error("unknown or missing split `{0}`")]
    MissingSplit(String),
    #[error("detector `{detector}` needs {what}")]
    MissingResource { detector: String, what: &'static str },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Tensor { .. } => "tensor_format",
            Error::Core(_) => "invalid_data",
            Error::Json { .. } => "json",
            Error::Csv(_) => "csv",
            Error::UnknownDetector(_) => "unknown_detector",
            Error::MissingSplit(_) => "missing_split",
            Error::MissingResource { .. } => "missing_resource",
            Error::Invalid(_) => "invalid_argument",
        }
    }
}

impl From<std::convert::Infallible> for Error {
    fn from(never: std::convert::Infallible) -> Self {
        match never {}
    }
}
