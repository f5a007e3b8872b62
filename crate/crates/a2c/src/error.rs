use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite {what} at update {update}")]
    NonFinite { what: String, update: u64 },
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("architecture mismatch: checkpoint has {found:016x}, expected {expected:016x}")]
    ArchMismatch { expected: u64, found: u64 },
    #[error(transparent)]
    Core(#[from] raymaze_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
