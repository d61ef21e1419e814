use adam_regret::Error as CoreError;
use thiserror::Error;

/// Process exit status for a successful fuzz run that found a confirmed violation.
pub const EXIT_VIOLATION: i32 = 10;

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 1: unreadable or invalid configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Exit 2: a run failed numerically.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Exit 3: the minimizer oracle found no attained minimum.
    #[error("{0}")]
    Unbounded(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numeric(_) => 2,
            CliError::Unbounded(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        if let CoreError::Io(io) = e.root() {
            return CliError::Io {
                path: "output".into(),
                source: std::io::Error::new(io.kind(), io.to_string()),
            };
        }
        match e.root() {
            CoreError::UnboundedMinimizer => CliError::Unbounded(msg),
            CoreError::InvalidParams(_) | CoreError::InvalidProblem(_) | CoreError::Parse(_) => CliError::Config(msg),
            _ => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
