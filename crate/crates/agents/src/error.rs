use thiserror::Error;

use adversim_core::attack::AttackError;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("missing configuration: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("no usable program after {attempts} replies: {last_error}")]
    Generation { attempts: usize, last_error: String },
    #[error("structure changed under coefficient-only mode: expected {expected}, got {found}")]
    StructureViolation { expected: String, found: String },
    #[error(transparent)]
    Attack(#[from] AttackError),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error("search aborted in iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: AgentError,
        /// Logs of the iterations completed before the failure.
        logs: Vec<crate::search::IterationLog>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
