use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated its documented range or shape.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data contained non-finite or otherwise unusable values.
    #[error("invalid data: {0}")]
    Data(String),

    /// An operation was attempted in a state that does not allow it.
    #[error("invalid state: {0}")]
    State(String),

    /// The experiment configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file parsed but its contents were unusable.
    #[error("format error: {message}")]
    Format {
        message: String,
        /// Per-row diagnostics, `(line, reason)`.
        rows: Vec<(usize, String)>,
    },

    /// A lower-level error annotated with the experiment cell it came from.
    #[error("{criterion} trial {trial}: {source}")]
    Trial {
        criterion: String,
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Data(_) => "data",
            Error::State(_) => "state",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Trial { source, .. } => source.kind(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Parameter(format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}
