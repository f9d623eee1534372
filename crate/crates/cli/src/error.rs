use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("requires artifact: {artifact} (run `topicvec {stage}` first)")]
    Missing { artifact: String, stage: &'static str },
    #[error(transparent)]
    Data(#[from] topicvec::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(topicvec::Error::Format(msg.into()))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Missing { .. } => 2,
            Self::Data(_) | Self::Io(_) | Self::Json(_) => 3,
        })
    }
}
