use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: configuration, model file, command-line values.
    #[error("{key}: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Runtime(String),
    #[error("failed checks: {}", .0.join(", "))]
    Verify(Vec<String>),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config { key: key.into(), message: message.to_string() }
    }

    pub fn runtime(message: impl ToString) -> Self {
        CliError::Runtime(message.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Runtime(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e)
    }
}
