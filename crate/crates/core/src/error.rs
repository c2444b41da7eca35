use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic { expected: String, found: Vec<u8> },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("missing label: {0}")]
    MissingLabel(String),

    #[error("zero-norm vector in {0}")]
    ZeroNorm(&'static str),

    #[error("missing context embedding for `{0}`")]
    MissingContext(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate clusters: {0}")]
    DegenerateClusters(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {artifact}: run {stage} first")]
    MissingArtifact { artifact: String, stage: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error's category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::MissingArtifact { .. } => 3,
            Error::Io { .. } => 5,
            Error::MissingColumn(_)
            | Error::Ingest(_)
            | Error::BadMagic { .. }
            | Error::Truncated(_)
            | Error::Parse { .. }
            | Error::NonFinite(_)
            | Error::DimMismatch { .. } => 4,
            _ => 1,
        }
    }
}
