use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed FST payload; `field` names the offending header field.
    #[error("format error in `{field}`: {msg}")]
    Format { field: &'static str, msg: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate center: row {row} has zero norm")]
    DegenerateCenter { row: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("palette error: {0}")]
    Palette(String),

    #[error("image {}: {msg}", path.display())]
    Image { path: PathBuf, msg: String },

    #[error("probe set has no examples for categories {missing:?} (examples per category: {counts:?})")]
    Coverage { missing: Vec<usize>, counts: Vec<usize> },

    #[error("probe set is empty: no concept passed the association threshold")]
    EmptyProbe,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(field: &'static str, msg: impl Into<String>) -> Self {
        Error::Format { field, msg: msg.into() }
    }
}
