use thiserror::Error;

/// Front-end errors, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid input files and arguments (exit 2).
    #[error("{0}")]
    Input(String),

    /// A numerical failure while running a valid input (exit 3).
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: spinoptics::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn numerical(context: impl Into<String>, source: spinoptics::Error) -> Self {
        CliError::Numerical { context: context.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
