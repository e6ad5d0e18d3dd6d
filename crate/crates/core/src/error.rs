use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("interaction point of triplet {index} at cell ({x}, {y}) lies outside the {width}x{height} grid")]
    OutOfBounds { index: usize, x: i64, y: i64, width: usize, height: usize },

    #[error("triplets {first} and {second} share interaction point cell ({x}, {y})")]
    VectorCollision { first: usize, second: usize, x: usize, y: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("class {class_id} out of range for {num_classes} classes")]
    ClassOutOfRange { class_id: usize, num_classes: usize },

    #[error("bad tensor magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported tensor version {0}")]
    UnsupportedVersion(u16),

    #[error("unsupported tensor dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("truncated tensor: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("tensor has {0} trailing bytes after payload")]
    TrailingBytes(usize),

    #[error("line {line}: field `{field}`: {message}")]
    Schema { line: usize, field: String, message: String },

    #[error("line {line}: unknown category id {category}")]
    UnknownCategory { line: usize, category: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("known-object evaluation requires {0}")]
    MissingKnownObject(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
