//! Error type shared across the crate.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure classification, used by callers that map errors to
/// process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad flags, bad hyperparameters, malformed requests.
    Config,
    /// Unreadable or inconsistent input data.
    Data,
    /// Computation produced or would produce meaningless numbers.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("i/o failure on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate record key ({subject}, {image})")]
    DuplicateKey { subject: String, image: String },

    #[error("dataset contains no records")]
    EmptyDataset,

    #[error("no template enrolled for subject {subject}")]
    MissingTemplate { subject: String },

    #[error(
        "impostor gallery too small: need at least 2 templates of other subjects, found {found}"
    )]
    TooFewImpostors { found: usize },

    #[error("degenerate impostor distribution: zero standard deviation")]
    DegenerateImpostors,

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("({subject}, {image}) does not resolve to an embedding record")]
    UnresolvedKey { subject: String, image: String },

    #[error("probe ({subject}, {image}) could not be labeled")]
    Probe {
        subject: String,
        image: String,
        #[source]
        source: Box<Error>,
    },

    #[error("pair set has no {which} pairs")]
    EmptyPairs { which: &'static str },

    #[error("need at least {need} records, found {found}")]
    TooFewRecords { need: usize, found: usize },

    #[error("threshold grid must be non-empty, finite, and strictly increasing")]
    BadGrid,

    #[error("far - frr does not change sign inside the threshold grid; widen the grid")]
    NoEerCrossing,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) => ErrorCategory::Config,
            Error::DegenerateImpostors
            | Error::NonFinite { .. }
            | Error::BadGrid
            | Error::NoEerCrossing => ErrorCategory::Numeric,
            Error::Probe { source, .. } => source.category(),
            _ => ErrorCategory::Data,
        }
    }
}

/// Adapter for `map_err` on filesystem operations, so the failing path ends
/// up in the message.
pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

/// Adapter for `map_err` on csv reads; keeps the line number when the
/// underlying error carries a position.
pub(crate) fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |err| {
        let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Malformed {
            path: path.to_owned(),
            line,
            message: err.to_string(),
        }
    }
}
