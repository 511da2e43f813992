use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to map errors onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or a parameter that violates a documented invariant.
    Input,
    /// Numerically or physically impossible request (out of segment, no root, ...).
    Domain,
    /// Filesystem failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("t = {t} s lies outside the road segment: {detail}")]
    OutOfSegment { t: f64, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample {index}: {reason}")]
    BadSample { index: usize, reason: String },

    #[error("singular least-squares system: {0}")]
    Singular(&'static str),

    #[error("underdetermined fit: need at least 2 distinct distances, got {distinct}")]
    Underdetermined { distinct: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("energy violation: detected power {total} exceeds the unit transmit power")]
    EnergyViolation { total: f64 },

    #[error("no solution: received power {power} exceeds the attainable maximum {max}")]
    NoSolution { power: f64, max: f64 },

    #[error("degenerate window: {clamped} of {total} arc-angle estimates hit the search bounds")]
    DegenerateWindow { clamped: usize, total: usize },

    #[error("trace already carries noise (sigma = {sigma})")]
    AlreadyNoisy { sigma: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(&'static str),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("sweep aborted at value {sweep_value}, trial {trial}: {source}")]
    Trial {
        sweep_value: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::Parse { .. }
            | Error::EnergyViolation { .. }
            | Error::Unsupported(_)
            | Error::Json(_) => ErrorKind::Input,
            Error::Io { .. } => ErrorKind::Io,
            Error::Trial { source, .. } | Error::InFile { source, .. } => source.kind(),
            _ => ErrorKind::Domain,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
