use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents (bad CSV cell, bad JSON, bad header).
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// A structural invariant of a record or manifest is violated.
    /// `invariant` names the single violated invariant.
    #[error("validation failed: {invariant}: {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("signal length mismatch: {detail}")]
    Alignment { detail: String },

    #[error("signal too short: need at least {needed} samples, got {got}")]
    Length { needed: usize, got: usize },

    #[error("empty signal")]
    EmptySignal,

    #[error("window out of bounds: {detail}")]
    Bounds { detail: String },

    /// A metric could not be computed for this record; the record is flagged.
    #[error("metric undefined: {metric}: {detail}")]
    MetricUndefined {
        metric: &'static str,
        detail: String,
    },

    /// A force-dependent operation was applied to a record without force signals.
    #[error("record has no force signals (dataset records motion only)")]
    MissingForces,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("model file version {found} not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("dimension mismatch: {0}")]
    Shape(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    pub fn validation(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            invariant,
            detail: detail.into(),
        }
    }
}
