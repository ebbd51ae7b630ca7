//! Error type shared across the library.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A column named in a schema, operation, or factor definition does not
    /// exist, or a schema mapping is malformed.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input text could not be parsed. `location` points at the offending
    /// row or line.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A structural invariant was violated (duplicate keys, length mismatch).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// An operation was invoked with invalid parameters.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A factor body referenced a column it did not declare in `requires`.
    #[error("factor `{factor}` references column `{column}` outside its declared requirements")]
    Definition { factor: String, column: String },

    /// A factor body returned a result that violates the three-column
    /// (id, date, value) contract.
    #[error("factor result contract violation: {0}")]
    Contract(String),

    /// A factor name could not be resolved in the registry. Distinct from
    /// unmet data requirements, which skip with a warning instead.
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    /// A factor was registered twice under the same name.
    #[error("factor `{0}` is already registered")]
    DuplicateFactor(String),

    /// The backtest found no usable factor values on any simulation date.
    #[error("empty universe: no non-null factor values overlap the return series")]
    EmptyUniverse,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// I/O error annotated with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}
