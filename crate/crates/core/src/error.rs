use thiserror::Error;

/// Failures while decoding a VITG feature file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"VITG\"")]
    BadMagic([u8; 4]),
    #[error("unsupported VITG version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("non-finite component at frame {frame}, component {component}")]
    NonFinite { frame: usize, component: usize },
    #[error("reserved header bytes must be zero")]
    ReservedBytes,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("header declares normalized rows but row {0} is not unit length")]
    NotNormalized(usize),
    #[error("invalid header: {0}")]
    Header(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("math domain error: {0}")]
    MathDomain(String),
    #[error("feature file: {0}")]
    Format(#[from] FormatError),
    #[error("parse error: {message} (in {text:?})")]
    Parse { message: String, text: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(message: impl Into<String>, text: impl Into<String>) -> Self {
        Error::Parse { message: message.into(), text: text.into() }
    }

    /// Whether a retry could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
