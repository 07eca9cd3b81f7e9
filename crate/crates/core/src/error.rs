use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: bad magic bytes {found:?}")]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("{path}: unsupported {what} {found}")]
    Unsupported {
        path: PathBuf,
        what: &'static str,
        found: u64,
    },

    #[error("{path}: truncated file, expected {expected} payload bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: non-finite value at element {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("layer {layer} out of range for {num_layers} layers")]
    LayerOutOfRange { layer: usize, num_layers: usize },

    #[error("expected a {expected} dump, found {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("bad subword alignment: {0}")]
    Alignment(String),

    #[error("zero-variance input: {0}")]
    ZeroVariance(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown layer {model}:{layer}")]
    UnknownLayer { model: String, layer: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by how the library was called rather than by
    /// the contents of a dump.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}
