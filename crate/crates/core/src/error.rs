use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants fall into three families (configuration, data, numeric) so that
/// front ends can map them onto distinct exit codes with [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at {location}: expected {expected}, got {actual}")]
    Shape {
        location: String,
        expected: usize,
        actual: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),

    #[error("non-finite value in {location}")]
    NonFinite { location: String },

    #[error("category index {index} out of vocabulary for field `{field}` (size {vocab})")]
    OutOfVocabulary {
        field: String,
        index: usize,
        vocab: usize,
    },

    #[error("user has no purchase history")]
    ColdUser,

    #[error("{path}:{line}: {message}")]
    Load {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("no eligible negative user for item {item}")]
    NoNegativePool { item: u64 },

    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse error family used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::Shape { .. } | Error::Checkpoint(_) => ErrorCategory::Config,
            Error::NonFinite { .. } => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn shape(location: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            location: location.into(),
            expected,
            actual,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
