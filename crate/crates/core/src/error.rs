use thiserror::Error;

/// Crate-wide error type. Serialization failures are split into distinct
/// variants so callers can tell truncation apart from corruption.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty document")]
    EmptyDocument,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("id already present: {0}")]
    DuplicateId(String),

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated input")]
    Truncated,

    #[error("checksum mismatch")]
    ChecksumMismatch,

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("unlabeled document id: {0}")]
    UnlabeledId(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
