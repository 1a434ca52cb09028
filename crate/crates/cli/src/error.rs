use std::path::Path;

use thiserror::Error;

/// Failure of a command, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag values.
    #[error("usage: {0}")]
    Usage(String),
    /// Input files that cannot be read or do not meet the data contract.
    #[error("{0}")]
    Data(String),
    /// A broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<gripcast_core::Error> for CliError {
    fn from(err: gripcast_core::Error) -> Self {
        use gripcast_core::Error as E;
        match err {
            E::InvalidRecord(_) | E::NoCrossing | E::AmbiguousCrossing(_) | E::DegenerateChannel(_) => {
                CliError::Data(err.to_string())
            }
            E::ShapeMismatch { .. } | E::Contract(_) | E::Generation(_) => CliError::Internal(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
