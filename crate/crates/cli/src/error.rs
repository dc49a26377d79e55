use edei_net::NetError;

/// Failure classes, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Checkpoint(_) => 4,
        }
    }
}

impl From<edei_core::Error> for CliError {
    fn from(e: edei_core::Error) -> Self {
        use edei_core::Error as E;
        match e {
            E::InvalidParam { .. } | E::Config { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Core(c) => c.into(),
            NetError::Config(_) => CliError::Config(e.to_string()),
            NetError::Checkpoint { .. } | NetError::MissingStage1 => CliError::Checkpoint(e.to_string()),
            NetError::Shape(_) | NetError::Io(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
