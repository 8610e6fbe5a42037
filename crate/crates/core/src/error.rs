use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("degenerate 6D rotation: {0}")]
    DegenerateSixD(String),

    /// A rotation feature could not be projected back to a valid rotation.
    #[error("degenerate rotation features at frame {frame}, joint {joint}: {reason}")]
    DegenerateFeatures {
        frame: usize,
        joint: usize,
        reason: String,
    },

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown representation kind `{0}`")]
    UnknownKind(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,

    #[error("bad file magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
