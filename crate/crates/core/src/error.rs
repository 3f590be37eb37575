use std::io;

use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    #[error("unknown zone `{0}` (tabulated zones: SZ, DZ)")]
    UnknownZone(String),

    #[error("unknown constituent `{0}` (expected matrix or fibril)")]
    UnknownConstituent(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The underlying error, with stage tags removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
