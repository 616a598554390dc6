//! Error type shared by every module of the crate.

use std::fmt;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by signal construction, link simulation, training and I/O.
#[derive(Debug)]
pub enum Error {
    /// A caller violated an operation precondition.
    InvalidArgument(String),
    /// A configuration file or override could not be parsed or validated.
    /// `line` is 1-based when the error is tied to a specific input line.
    Config { line: Option<usize>, message: String },
    /// Cross-correlation peak too weak to trust the alignment.
    SyncFailure { peak: f64 },
    /// Adaptive equalizer failed to converge (or blew up).
    TrainingFailure(String),
    /// Slicer could not separate two amplitude levels.
    DecisionFailure(String),
    /// A BER curve never crosses the requested threshold.
    NotReached { threshold_ber: f64 },
    /// File I/O failure, with the offending path attached.
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config { line: None, message: msg.into() }
    }

    pub(crate) fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config { line: Some(line), message: msg.into() }
    }

    pub(crate) fn training(msg: impl Into<String>) -> Self {
        Error::TrainingFailure(msg.into())
    }

    pub(crate) fn decision(msg: impl Into<String>) -> Self {
        Error::DecisionFailure(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Config { line: Some(line), message } => {
                write!(f, "config error (line {line}): {message}")
            }
            Error::Config { line: None, message } => write!(f, "config error: {message}"),
            Error::SyncFailure { peak } => {
                write!(f, "synchronization failed: correlation peak {peak:.3} below 0.2")
            }
            Error::TrainingFailure(msg) => write!(f, "equalizer training failed: {msg}"),
            Error::DecisionFailure(msg) => write!(f, "decision failed: {msg}"),
            Error::NotReached { threshold_ber } => {
                write!(f, "BER curve never reaches threshold {threshold_ber:.3e}")
            }
            Error::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
