use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    /// The report was written but no candidate met the error budget.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
        })
    }
}

impl From<qfnet_core::Error> for CliError {
    fn from(e: qfnet_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
