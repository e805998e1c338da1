use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("[{stage}] {source}")]
    Input {
        stage: &'static str,
        #[source]
        source: planminer::Error,
    },

    #[error("[{stage}] {message}")]
    Pipeline { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input { .. } => 2,
            CliError::Pipeline { .. } => 3,
        }
    }
}

/// Attaches a stage name to library errors.
pub trait StageExt<T> {
    fn input(self, stage: &'static str) -> Result<T, CliError>;
    fn pipeline(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for planminer::Result<T> {
    fn input(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Input { stage, source })
    }

    fn pipeline(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Pipeline {
            stage,
            message: e.to_string(),
        })
    }
}
