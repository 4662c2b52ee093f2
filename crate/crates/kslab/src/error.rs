use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] kslab_core::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration and input problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        use kslab_core::Error as E;
        match self {
            Self::Core(E::SolverFailure { .. } | E::InternalConsistency(_) | E::CflViolation { .. }) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Self::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
