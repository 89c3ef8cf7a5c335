use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("computation failed: {0}")]
    Computation(String),
}

impl CliError {
    /// 1 for anything wrong with the inputs, 2 when a valid run fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Computation(_) => 2,
            _ => 1,
        }
    }
}

impl From<gradsense_core::Error> for CliError {
    fn from(e: gradsense_core::Error) -> Self {
        CliError::Computation(e.to_string())
    }
}
