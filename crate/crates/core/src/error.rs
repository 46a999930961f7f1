use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle (area {area:e} m²)")]
    DegenerateTriangle { area: f64 },

    #[error("plane normal is not unit length (norm {0})")]
    NonUnitNormal(f64),

    #[error("grazing or invalid reflection geometry")]
    InvalidReflection,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: invalid field `{field}`: {msg}")]
    Invalid { path: PathBuf, field: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(path: impl Into<PathBuf>, field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invalid { path: path.into(), field: field.into(), msg: msg.into() }
    }

    /// Wraps a serde_json error with the file it came from.
    pub(crate) fn json(path: impl Into<PathBuf>, e: serde_json::Error) -> Self {
        Error::Parse { path: path.into(), line: e.line(), msg: format!("column {}: {e}", e.column()) }
    }
}
