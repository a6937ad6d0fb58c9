//! Agent loop that evolves attacker scoring programs: an initialization
//! agent writes a first program, then reflection and modification agents
//! propose and apply changes, each candidate scored in simulation.

pub mod agents;
pub mod client;
pub mod error;
pub mod mock;
pub mod prompts;
pub mod search;

pub use agents::{extract_program, function_init, function_modi, function_refl, Memory, MemoryEntry};
pub use client::{ChatClient, HttpClient, Message, Role};
pub use error::{AgentError, ClientError, SearchError};
pub use mock::DeterministicMock;
pub use search::{
    read_logs_jsonl, run_identifier_search, run_search_with, test_sim, write_logs_jsonl, CandidateLog, Evaluator,
    IterationLog, SearchConfig, SearchOutcome, SimEvaluator,
};
