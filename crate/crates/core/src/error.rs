use std::path::PathBuf;

/// Errors produced anywhere in the simulation and analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a model invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value lies outside an instrument range (e.g. PZT voltage).
    #[error("range error: {0}")]
    Range(String),

    /// A caller broke a data-structure contract (unsorted input, overlapping pulses, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("no dominant period found: {0}")]
    NoPeriod(String),

    #[error("degenerate histogram: {0}")]
    Degenerate(String),

    #[error("misaligned series: {0}")]
    Alignment(String),

    #[error("scan point {index}: {source}")]
    ScanPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Broad error classes, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Range(_) => ErrorKind::Config,
            Error::Parse { .. } | Error::Io { .. } | Error::Contract(_) | Error::Alignment(_) => {
                ErrorKind::Data
            }
            Error::Domain(_)
            | Error::InsufficientData(_)
            | Error::UndefinedRatio(_)
            | Error::NoPeriod(_)
            | Error::Degenerate(_) => ErrorKind::Numerical,
            Error::ScanPoint { source, .. } => source.kind(),
        }
    }

    /// Process exit code: 2 config, 3 data/parse, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}
