use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training failed in window {window}: {message}")]
    Training { window: usize, message: String },

    #[error(transparent)]
    Core(#[from] hcspinn::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 training failure, 2 config error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        use hcspinn::Error as E;
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Training { .. } => 1,
            HarnessError::Core(e) => match e {
                E::Config(_) | E::Parse { .. } | E::Unsupported(_) => 2,
                E::Io(_) => 3,
                _ => 1,
            },
        }
    }
}
