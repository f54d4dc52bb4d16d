use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed an argument that violates an operation's contract
    /// (dimension mismatch, index out of range, empty input).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A parameter is outside its valid range. `owner` names the module
    /// whose constraint was violated.
    #[error("invalid configuration ({owner}): {message}")]
    Config { owner: &'static str, message: String },

    /// A binary file (IDX dataset or snapshot) is malformed.
    #[error("{context}: {kind} at byte offset {offset}")]
    Parse {
        context: String,
        offset: u64,
        kind: ParseErrorKind,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    BadMagic { expected: u32, found: u32 },
    BadSignature,
    UnsupportedVersion(u32),
    Truncated { needed: u64, available: u64 },
    CountMismatch { images: u64, labels: u64 },
    TrailingBytes(u64),
    InvalidValue(String),
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::BadMagic { expected, found } => {
                write!(f, "bad magic 0x{found:08x} (expected 0x{expected:08x})")
            }
            ParseErrorKind::BadSignature => write!(f, "bad file signature"),
            ParseErrorKind::UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            ParseErrorKind::Truncated { needed, available } => {
                write!(f, "truncated: needed {needed} bytes, {available} available")
            }
            ParseErrorKind::CountMismatch { images, labels } => {
                write!(f, "image count {images} does not match label count {labels}")
            }
            ParseErrorKind::TrailingBytes(n) => write!(f, "{n} unexpected trailing bytes"),
            ParseErrorKind::InvalidValue(msg) => write!(f, "invalid value: {msg}"),
        }
    }
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(owner: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            owner,
            message: msg.into(),
        }
    }

    pub(crate) fn parse(context: impl Into<String>, offset: u64, kind: ParseErrorKind) -> Self {
        Error::Parse {
            context: context.into(),
            offset,
            kind,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
