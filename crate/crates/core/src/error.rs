use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. The CLI maps each variant to a
/// distinct exit code through [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("store is empty")]
    EmptyStore,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("format error: {0}")]
    Format(String),
    #[error("count mismatch: {embeddings} embedding rows but {metadata} metadata records")]
    CountMismatch { embeddings: usize, metadata: usize },
    #[error("taxonomy violation: {0}")]
    TaxonomyViolation(String),
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("retrieval-augmented prompt requires at least one retrieved hit")]
    MissingContext,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("length mismatch: {predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("not enough data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// Stable machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVector => "ZeroVector",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::DuplicateId(_) => "DuplicateId",
            Error::EmptyStore => "EmptyStore",
            Error::InvalidParams(_) => "InvalidParams",
            Error::Format(_) => "FormatError",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::TaxonomyViolation(_) => "TaxonomyViolation",
            Error::Io(_) => "IoError",
            Error::MissingContext => "MissingContext",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::Timeout => "Timeout",
            Error::Transport(_) => "TransportError",
            Error::Protocol(_) => "ProtocolError",
            Error::EmptyQuerySet => "EmptyQuerySet",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InsufficientData(_) => "InsufficientData",
        }
    }
}
