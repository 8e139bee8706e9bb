//! Crate-wide error type.

use std::fmt;
use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug)]
pub enum Error {
    /// Tensor or feature-map shape mismatch; the message names both shapes.
    Shape(String),
    /// Invalid configuration value or combination.
    Config(String),
    /// Dataset layout or content problem.
    Data(String),
    /// Flow estimator misuse (e.g. oracle flow requested on non-synthetic frames).
    Flow(String),
    /// Invalid annotation schedule or triplet sampling input.
    Schedule(String),
    /// Training failure (divergence, optimizer rejection).
    Train(String),
    /// Checkpoint format or content problem.
    Checkpoint(String),
    /// Command-line usage error.
    Usage(String),
    /// Filesystem error with the offending path.
    Io { path: PathBuf, source: std::io::Error },
    /// Image decode/encode error with the offending path.
    Image { path: PathBuf, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Flow(m) => write!(f, "flow error: {m}"),
            Error::Schedule(m) => write!(f, "schedule error: {m}"),
            Error::Train(m) => write!(f, "training error: {m}"),
            Error::Checkpoint(m) => write!(f, "checkpoint error: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Io { path, source } => write!(f, "io error at {}: {source}", path.display()),
            Error::Image { path, message } => {
                write!(f, "image error at {}: {message}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
