use qudit_core::QuditError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Physics(#[from] QuditError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 I/O, 2 configuration, 3 physics, 4 infeasible.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Physics(e) => match e {
                QuditError::UnknownSpec(_) | QuditError::InvalidArgument(_) | QuditError::InvalidSpin(_) | QuditError::Empty(_) => 2,
                QuditError::Infeasible(_) => 4,
                _ => 3,
            },
        }
    }
}
