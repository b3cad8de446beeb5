use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("guard violation: {0}")]
    Guard(String),

    #[error(transparent)]
    Core(#[from] copolymer::Error),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use copolymer::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Core(E::InvalidParameter(_) | E::UnsupportedLaw(_)) => 1,
            CliError::Guard(_) => 2,
            CliError::Core(E::BudgetExceeded { .. } | E::KernelHorizon { .. }) => 2,
            CliError::Core(E::Numerical(_)) | CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
