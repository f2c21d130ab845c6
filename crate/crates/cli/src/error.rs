use thiserror::Error;

use liqjump_core::Error as CoreError;

/// Failure classes of the command-line driver.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input data error: {0}")]
    Data(CoreError),

    #[error("modeling error: {0}")]
    Model(CoreError),

    #[error("output error: {0}")]
    Output(#[from] std::io::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// Process exit code: 1 internal, 2 configuration, 3 input data,
    /// 4 insufficient history or model failure, 5 output.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Internal(_) => 1,
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Model(_) => 4,
            Self::Output(_) => 5,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e.root() {
            CoreError::InvalidInput(_) | CoreError::TooManyAssets { .. } => {
                Self::Config(e.to_string())
            }
            CoreError::Csv(_)
            | CoreError::TooManyRejects { .. }
            | CoreError::TickOutsideDay { .. }
            | CoreError::NoPriceBasis
            | CoreError::AlreadyTreated
            | CoreError::MissingDay { .. } => Self::Data(e),
            CoreError::SeriesTooShort { .. }
            | CoreError::ZeroVariance
            | CoreError::FitFailed(_)
            | CoreError::NotPsd { .. }
            | CoreError::Infeasible(_) => Self::Model(e),
            CoreError::Io(_) | CoreError::Json(_) => {
                Self::Output(std::io::Error::other(e.to_string()))
            }
            CoreError::InFile { .. } => Self::Internal(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(std::io::Error::other(e))
    }
}
