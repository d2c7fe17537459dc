use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) | CliError::Csv(_) => 3,
        }
    }
}

impl From<parlife::Error> for CliError {
    fn from(e: parlife::Error) -> Self {
        match e {
            parlife::Error::InvalidParameter(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}
