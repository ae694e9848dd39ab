use vrag_core::Error;

use crate::config::ConfigError;

pub const OK: i32 = 0;
pub const INTERNAL: i32 = 1;

/// Exit code and stable kind name for an error. Usage errors exit with 2
/// from the argument parser before any of this runs.
pub fn classify(err: &anyhow::Error) -> (i32, &'static str) {
    if err.downcast_ref::<ConfigError>().is_some() {
        return (4, "ConfigError");
    }
    if let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) {
        return (code(e), e.kind());
    }
    if err
        .chain()
        .any(|c| c.downcast_ref::<std::io::Error>().is_some())
    {
        return (3, "IoError");
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return (10, "FormatError");
    }
    (INTERNAL, "Internal")
}

pub fn code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 3,
        Error::Format(_) => 10,
        Error::NonFiniteValue { .. } => 11,
        Error::CountMismatch { .. } => 12,
        Error::TaxonomyViolation(_) => 13,
        Error::DuplicateId(_) => 14,
        Error::ZeroVector => 15,
        Error::DimensionMismatch { .. } => 16,
        Error::EmptyStore => 17,
        Error::InvalidParams(_) => 18,
        Error::MissingContext => 19,
        Error::InvalidRequest(_) => 20,
        Error::Timeout => 21,
        Error::Transport(_) => 22,
        Error::Protocol(_) => 23,
        Error::EmptyQuerySet => 24,
        Error::LengthMismatch { .. } => 25,
        Error::InsufficientData(_) => 26,
    }
}
