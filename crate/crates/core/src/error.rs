use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HgnError>;

#[derive(Debug, Error)]
pub enum HgnError {
    #[error("line {line}: parse failure: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: invalid `{field}`: {message}")]
    InvalidRecord {
        line: usize,
        field: String,
        message: String,
    },

    #[error("trace mixes class counts: expected {expected}, found {found}")]
    MismatchedClasses { expected: usize, found: usize },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("invalid `{name}`: {message}")]
    InvalidParam { name: String, message: String },

    #[error("record `{sample_id}` has no `features`; density-aware calibration requires them")]
    MissingFeatures { sample_id: String },

    #[error("`features` dimension mismatch: model expects {expected}, got {found}")]
    FeatureDimension { expected: usize, found: usize },

    #[error("unknown calibration method `{0}`")]
    UnknownMethod(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HgnError {
    pub fn param(name: impl Into<String>, message: impl fmt::Display) -> Self {
        HgnError::InvalidParam {
            name: name.into(),
            message: message.to_string(),
        }
    }
}
