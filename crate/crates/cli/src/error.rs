use adversim_agents::{AgentError, ClientError, SearchError};
use adversim_core::attack::AttackError;
use adversim_core::{IdentifyError, MetricsError, ScenarioError};
use adversim_train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Identify(#[from] IdentifyError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for invalid input, 3 for chat backend failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Identify(_) => 2,
            CliError::Scenario(e) => match e {
                ScenarioError::Io { .. } => 1,
                _ => 2,
            },
            CliError::Attack(AttackError::Identify(_)) => 2,
            CliError::Client(_) => 3,
            CliError::Search(e) => match e {
                SearchError::Config(_) => 2,
                SearchError::Aborted {
                    source: AgentError::Client(_),
                    ..
                } => 3,
                _ => 1,
            },
            CliError::Train(TrainError::Config(_) | TrainError::Identify(_)) => 2,
            _ => 1,
        }
    }
}
