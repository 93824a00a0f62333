use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("input: {0}")]
    Input(String),

    #[error("{0}")]
    Unsplittable(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Process exit code: 2 usage, 3 input/parse, 4 unsplittable, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Unsplittable(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<fishseg::Error> for CliError {
    fn from(e: fishseg::Error) -> Self {
        match e {
            fishseg::Error::Unsplittable { .. } => CliError::Unsplittable(e.to_string()),
            fishseg::Error::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
