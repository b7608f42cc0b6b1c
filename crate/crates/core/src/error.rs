use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A text document (contour CSV, PitchTier, manifest) violated its format.
    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    /// A frame vector does not fit the fixed input length.
    #[error("contour too long: {required} frames required, {available} available")]
    TooLong { required: usize, available: usize },

    #[error("manifest row {row} ({path}): {source}")]
    ManifestRow {
        row: usize,
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Non-finite loss or logits, or a failed gradient check.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// An I/O failure attributed to `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
