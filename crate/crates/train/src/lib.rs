//! Ego-policy learning: a TD3 learner, closed-loop training against planned
//! attacks, and the crash-rate / route-completion testing pass.

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod nn;
pub mod policy;
pub mod td3;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use error::TrainError;
pub use eval::{aggregate, evaluate, evaluate_agent, AggregateMetrics, Condition, ConditionMetrics, EvalMetrics};
pub use policy::{Policy, PolicyAgent, Td3Policy};
pub use td3::{ReplayBuffer, Td3, Td3Config, Transition};
pub use train::{curves_csv, run_repeats, train_adversarial, RepeatOutcome, Snapshot, TrainConfig, TrainOutcome};
