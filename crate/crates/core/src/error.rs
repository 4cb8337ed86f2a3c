use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),

    #[error("empty region of interest: {0}")]
    EmptyRoi(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the environment (files, permissions) rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: String::from("<csv>"),
                source,
            },
            other => Error::Format(format!("{other:?}")),
        }
    }
}
