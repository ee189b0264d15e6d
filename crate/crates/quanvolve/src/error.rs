//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-facing configuration is out of range or unsupported.
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal API contract was violated (shape/dimension mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A state could not be decoded back into an image.
    #[error("decode error: {0}")]
    Decode(String),

    /// An IDX file had an unexpected magic number.
    #[error("bad IDX magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    IdxBadMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    /// An IDX file ended before the promised payload.
    #[error("truncated IDX file: {0}")]
    IdxTruncated(String),

    /// Image and label files disagree on the sample count.
    #[error("IDX count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// An encoded-dataset file is malformed.
    #[error("cache format error: {0}")]
    CacheFormat(String),

    /// An encoded-dataset file does not match the requested configuration.
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
