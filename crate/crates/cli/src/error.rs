use shotseq_core::PermError;
use shotseq_data::DataError;
use shotseq_nn::NnError;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Format(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Diverged { .. } | NnError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            NnError::Checkpoint(_) | NnError::Cinematology(_) | NnError::Io(_) => CliError::Format(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PermError> for CliError {
    fn from(e: PermError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<shotseq_core::LossError> for CliError {
    fn from(e: shotseq_core::LossError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<shotseq_core::MetricsError> for CliError {
    fn from(e: shotseq_core::MetricsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Format(format!("{}: {e}", path.display()))
}

pub type Result<T> = std::result::Result<T, CliError>;
