use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate dictionary: columns {first} and {second} are linearly dependent")]
    DegenerateDictionary { first: usize, second: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss (gradient norm {grad_norm:e})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        grad_norm: f64,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file: needed {needed} bytes, {available} available")]
    Truncated { needed: u64, available: u64 },

    #[error("dimension overflow: {count} x {dim} does not fit in memory arithmetic")]
    DimOverflow { count: u64, dim: u64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("config error: {0}")]
    Config(String),

    #[error("detection service transport failure: {0}")]
    Transport(String),

    #[error("malformed detection response: {0}")]
    MalformedResponse(String),

    #[error("detection service returned no detections")]
    EmptyDetections,

    #[error("image encoding failed: {0}")]
    Image(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for the error classes produced by the external detection client.
    pub fn is_external_service(&self) -> bool {
        matches!(
            self,
            Error::Transport(_) | Error::MalformedResponse(_) | Error::EmptyDetections
        )
    }
}
