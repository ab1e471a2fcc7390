use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Why an external lesion editor call failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditorFailureKind {
    Spawn,
    Exit(Option<i32>),
    Timeout,
    MissingOutput,
    GeometryMismatch,
}

impl fmt::Display for EditorFailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Spawn => write!(f, "could not start handler"),
            Self::Exit(Some(code)) => write!(f, "handler exited with status {code}"),
            Self::Exit(None) => write!(f, "handler terminated by signal"),
            Self::Timeout => write!(f, "handler timed out"),
            Self::MissingOutput => write!(f, "handler produced no readable output"),
            Self::GeometryMismatch => write!(f, "handler output geometry mismatch"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite input intensity at voxel {index}")]
    NonFiniteInput { index: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("sampling policy has no enabled artifact")]
    EmptyPolicy,

    #[error("no valid generation site: {0}")]
    NoValidSite(String),

    #[error("insufficient context: {0}")]
    InsufficientContext(String),

    #[error("editor failure ({kind}): {diagnostics}")]
    EditorFailure {
        kind: EditorFailureKind,
        diagnostics: String,
        request_dir: Option<PathBuf>,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
