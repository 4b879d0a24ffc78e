use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("document is empty after trimming")]
    EmptyDocument,

    #[error("malformed template {template:?}: expected exactly one [desc] slot, found {slots}")]
    MalformedTemplate { template: String, slots: usize },

    #[error("label prompt set needs at least one description and one template")]
    EmptyLabelSet,

    #[error("embedding collapsed to the zero vector (norm {norm:e})")]
    DegenerateEmbedding { norm: f64 },

    #[error("token index {index} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { index: usize, vocab_size: usize },

    #[error("cannot encode an empty token list")]
    EmptyTokens,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite gradient entry in {parameter}")]
    NonFiniteGradient { parameter: &'static str },

    #[error("invalid optimizer setting: {0}")]
    InvalidOptimizer(String),

    #[error("remote encoder unavailable: {0}")]
    RemoteEncoderUnavailable(String),

    #[error("remote encoder protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("pseudo-label pool has no documents in any class")]
    EmptyPool,

    #[error("invalid sample request: {0}")]
    InvalidSample(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("label {label} at line {line} outside [{min}, {max}]")]
    LabelRange { line: u64, label: i64, min: i64, max: i64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("bad value for `{key}` at line {line}: expected {expected}, got {value:?}")]
    Type {
        key: String,
        line: usize,
        expected: &'static str,
        value: String,
    },

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse grouping used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateEmbedding { .. } | Error::NonFiniteGradient { .. } => {
                ErrorClass::Numerical
            }
            Error::Config(_) | Error::UnknownKey { .. } | Error::Type { .. } => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
