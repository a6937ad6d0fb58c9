use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("step {step} out of range for track of {len} samples")]
    Index { step: usize, len: usize },
    #[error("config error: {0}")]
    Config(String),
}

impl ScenarioError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("override references unknown background vehicle {0}")]
    UnknownOverride(u32),
    #[error("override for vehicle {vehicle_id} starts at step {start}, beyond horizon {horizon}")]
    OverrideStart {
        vehicle_id: u32,
        start: usize,
        horizon: usize,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum IdentifyError {
    #[error("parse error at byte {position}: expected {expected}, found {found}")]
    Parse {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("requested {requested} attackers but scenario has {available} background vehicles")]
    TooFewVehicles { requested: usize, available: usize },
    #[error("invalid identifier parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("ego buffer has no trajectories for scenario {0}")]
    EmptyBuffer(String),
    #[error("trajectory lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("attacker {0} not found in scenario")]
    UnknownAttacker(u32),
    #[error("attack start {start} not before horizon {horizon}")]
    BadAttackStart { start: usize, horizon: usize },
    #[error("no candidates supplied")]
    Empty,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("track too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
