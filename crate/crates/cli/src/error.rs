use std::path::PathBuf;

use thiserror::Error;

/// Failure of one CLI invocation, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] qtransport::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 numerical, 4 I/O, 5 infeasible on the platform.
    pub fn exit_code(&self) -> i32 {
        use qtransport::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) if e.is_infeasible() => 5,
            CliError::Core(
                E::InvalidParameter { .. }
                | E::UnknownStrategy { .. }
                | E::DimensionMismatch { .. }
                | E::AsymmetricCoupling { .. }
                | E::NonpositiveSiteEnergy { .. }
                | E::AsymmetryBeyondTolerance { .. }
                | E::LossNotSupported { .. },
            ) => 2,
            CliError::Core(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
