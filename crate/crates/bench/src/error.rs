use std::process::ExitCode;

/// Command failure, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration files. Exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Unreadable, corrupt or incompatible checkpoints. Exit code 3.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Checkpoint(_) => 3,
            CliError::Runtime(_) => 1,
        })
    }
}

impl From<raymaze_core::Error> for CliError {
    fn from(e: raymaze_core::Error) -> Self {
        use raymaze_core::Error as E;
        match e {
            E::Io(_) | E::Consistency(_) | E::EpisodeDone => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<raymaze_a2c::Error> for CliError {
    fn from(e: raymaze_a2c::Error) -> Self {
        use raymaze_a2c::Error as E;
        match e {
            E::Checkpoint { .. } | E::ArchMismatch { .. } => CliError::Checkpoint(e.to_string()),
            E::InvalidArgument(_) => CliError::Config(e.to_string()),
            E::Core(inner) => inner.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
