use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("image too small: {width}x{height} (minimum {min}x{min})")]
    TooSmall { width: usize, height: usize, min: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("message of {bits} bits exceeds pattern capacity of {capacity}")]
    CapacityExceeded { bits: usize, capacity: usize },

    #[error("key family {actual} cannot be used here (expected {expected})")]
    WrongFamily {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("{path}: images with an alpha channel are not supported")]
    AlphaChannel { path: PathBuf },

    #[error("{path}: unsupported pixel format {format}")]
    UnsupportedFormat { path: PathBuf, format: String },

    #[error("malformed message: {0}")]
    Message(String),

    #[error("learned filter unavailable: {0}")]
    FilterUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] ::image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn mismatch(lw: usize, lh: usize, rw: usize, rh: usize) -> Self {
        Error::DimensionMismatch {
            left_width: lw,
            left_height: lh,
            right_width: rw,
            right_height: rh,
        }
    }
}
