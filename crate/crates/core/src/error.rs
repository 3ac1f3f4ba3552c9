use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {op} got {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("contract violated in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Load(#[from] LoadError),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's inputs (paths, files, config)
    /// rather than by the library itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Load(_) | Error::Format(_) | Error::Io { .. } | Error::Json(_)
        )
    }
}

/// Failures reading the embedding interchange format.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("bad magic in {path}: expected STGE, found {found:?}")]
    BadMagic { path: PathBuf, found: Vec<u8> },

    #[error("unsupported interchange version {0}")]
    Version(u32),

    #[error("tensor file truncated while reading example {id}")]
    Truncated { id: String },

    #[error("example {id}: {detail}")]
    Record { id: String, detail: String },

    #[error("manifest counts disagree with example list: {detail}")]
    CountMismatch { detail: String },

    #[error("manifest: {0}")]
    Manifest(String),
}
