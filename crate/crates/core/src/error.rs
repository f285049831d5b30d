use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Text input (OBJ, PLY) that does not match the supported subset.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Binary grid-set container that is malformed.
    #[error("grid-set format error: {0}")]
    Format(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("grid dimensions differ: {left:?} vs {right:?}")]
    DimsMismatch { left: (usize, usize, usize), right: (usize, usize, usize) },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("invariant violated in stage `{stage}`: {message}")]
    Invariant { stage: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Wraps an error with the file it came from.
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub(crate) fn invariant(stage: &'static str, message: impl Into<String>) -> Self {
        Error::Invariant { stage, message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File { path: path.into(), source: Box::new(self) }
    }

    /// Process exit status for this error: 1 usage/config, 2 data/parse, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Format(_)
            | Error::Io { .. }
            | Error::Serialization(_)
            | Error::DimsMismatch { .. } => 2,
            Error::Invariant { .. } => 3,
            Error::File { source, .. } => source.exit_code(),
        }
    }
}
