use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input does not parse under its declared format.
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    /// A value parsed but is not acceptable as data (NaN or infinite).
    #[error("data error in {context}: non-finite value at (row {row}, col {col})")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate subset: {0}")]
    DegenerateSubset(String),

    #[error("undefined recall: label vector contains no positives")]
    UndefinedRecall,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
