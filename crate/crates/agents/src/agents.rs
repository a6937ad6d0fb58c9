//! The three agents. Each renders its prompt, calls the chat client and
//! turns the reply into a program or a suggestion.

use adversim_core::identifier::ScoreProgram;
use serde::{Deserialize, Serialize};

use crate::client::{ChatClient, Message};
use crate::error::AgentError;
use crate::prompts;

pub const TEMPERATURE: f64 = 0.7;
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub program: String,
    pub success_rate: f64,
}

/// Chronological (program, full-eval success rate) pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Memory {
    pub entries: Vec<MemoryEntry>,
}

impl Memory {
    pub fn push(&mut self, program: &ScoreProgram, success_rate: f64) {
        self.entries.push(MemoryEntry {
            program: program.pretty(),
            success_rate,
        });
    }
}

/// Body of the first fenced block in `reply`.
pub fn first_fenced_block(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let rest = &reply[start + 3..];
    // Skip the info string on the opening fence.
    let body_start = rest.find('\n')? + 1;
    let body = &rest[body_start..];
    let end = body.find("```")?;
    Some(body[..end].trim())
}

/// Parses the first fenced block of a reply as a scoring program.
pub fn extract_program(reply: &str) -> Result<ScoreProgram, String> {
    let block = first_fenced_block(reply).ok_or_else(|| "reply contains no fenced code block".to_string())?;
    ScoreProgram::parse(block).map_err(|e| e.to_string())
}

/// Text between `<suggestion>` tags, or the whole reply when untagged.
pub fn extract_suggestion(reply: &str) -> String {
    if let (Some(a), Some(b)) = (reply.find("<suggestion>"), reply.find("</suggestion>")) {
        if a < b {
            return reply[a + "<suggestion>".len()..b].trim().to_string();
        }
    }
    reply.trim().to_string()
}

fn retry_note(err: &str) -> String {
    format!("The previous reply could not be used: {err}\nReply again with exactly one fenced block holding a valid expression.")
}

pub fn function_init(client: &mut dyn ChatClient) -> Result<ScoreProgram, AgentError> {
    let mut messages = vec![Message::system(prompts::system()), Message::user(prompts::init())];
    let mut last_error = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let reply = client.send(&messages, TEMPERATURE)?;
        match extract_program(&reply) {
            Ok(p) => {
                if attempt > 1 {
                    log::info!("initialization succeeded on attempt {attempt}");
                }
                return Ok(p);
            }
            Err(e) => {
                log::warn!("initialization attempt {attempt} unusable: {e}");
                messages.push(Message::assistant(reply));
                messages.push(Message::user(retry_note(&e)));
                last_error = e;
            }
        }
    }
    Err(AgentError::Generation {
        attempts: MAX_ATTEMPTS,
        last_error,
    })
}

pub fn function_refl(
    client: &mut dyn ChatClient,
    memory: &Memory,
    f: &ScoreProgram,
    e: f64,
    minor_only: bool,
) -> Result<String, AgentError> {
    let messages = [
        Message::system(prompts::system()),
        Message::user(prompts::reflection(memory, f, e, minor_only)),
    ];
    Ok(client.send(&messages, TEMPERATURE)?)
}

pub fn function_modi(
    client: &mut dyn ChatClient,
    f: &ScoreProgram,
    suggestion: &str,
    minor_only: bool,
) -> Result<ScoreProgram, AgentError> {
    let mut messages = vec![
        Message::system(prompts::system()),
        Message::user(prompts::modification(f, &extract_suggestion(suggestion), minor_only)),
    ];
    let mut last = AgentError::Generation {
        attempts: 0,
        last_error: String::new(),
    };
    for attempt in 1..=MAX_ATTEMPTS {
        let reply = client.send(&messages, TEMPERATURE)?;
        let note = match extract_program(&reply) {
            Ok(p) if !minor_only || p.structure_hash == f.structure_hash => return Ok(p),
            Ok(p) => {
                let note = format!(
                    "the structure changed from `{}` to `{}`; only numeric coefficients may change",
                    f.pretty(),
                    p.pretty()
                );
                last = AgentError::StructureViolation {
                    expected: f.structure_hash.clone(),
                    found: p.structure_hash,
                };
                note
            }
            Err(e) => {
                last = AgentError::Generation {
                    attempts: MAX_ATTEMPTS,
                    last_error: e.clone(),
                };
                e
            }
        };
        log::warn!("modification attempt {attempt} rejected: {note}");
        messages.push(Message::assistant(reply));
        messages.push(Message::user(retry_note(&note)));
    }
    Err(last)
}
