//! Scenario files, output formats and commands of the `hitch` binary.

pub mod bundled;
pub mod commands;
pub mod output;
pub mod scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("scenario error: {0}")]
    Schema(String),
    #[error("solve failed: {0}")]
    Solve(String),
    #[error("simulation failed: {0}")]
    SimFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Solve(_) => 3,
            CliError::SimFailed(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}
