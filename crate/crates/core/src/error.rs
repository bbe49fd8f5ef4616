use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// Each variant maps onto a stable, machine-parseable category string used by
/// the command-line front end (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("cannot split: {0}")]
    CannotSplit(String),
    #[error("image {width}x{height} is smaller than the {size}x{size} patch")]
    TooSmallImage { width: usize, height: usize, size: usize },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate group: {0}")]
    DegenerateGroup(String),
    #[error("wrong framework: expected {expected}, found {found}")]
    WrongFramework { expected: String, found: String },
    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidRecord(_) => "invalid-record",
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidScale(_) => "invalid-scale",
            Error::InvalidSplit(_) => "invalid-split",
            Error::CannotSplit(_) => "cannot-split",
            Error::TooSmallImage { .. } => "too-small-image",
            Error::ZeroVariance(_) => "zero-variance",
            Error::InsufficientData(_) => "insufficient-data",
            Error::DegenerateGroup(_) => "degenerate-group",
            Error::WrongFramework { .. } => "wrong-framework",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
