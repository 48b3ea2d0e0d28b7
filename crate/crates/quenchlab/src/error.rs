use quenchlab_core::Error as CoreError;

/// Failures of the front end, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("solver error ({context}): {source}")]
    Solver {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub fn solver(context: impl Into<String>, source: CoreError) -> Self {
        match source {
            CoreError::InvalidParameter { name, reason } => CliError::Config {
                path: name.to_string(),
                message: reason,
            },
            source => CliError::Solver {
                context: context.into(),
                source,
            },
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Format { .. } => 2,
            CliError::Solver { .. } | CliError::Io { .. } => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::solver("setup", e)
    }
}
