//! Offline stand-in for a chat backend. Replies depend only on the messages,
//! the seed and the call counter, so searches replay byte-for-byte.

use adversim_core::identifier::dsl::{BinOp, Expr};
use adversim_core::identifier::ScoreProgram;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::agents::{extract_suggestion, first_fenced_block};
use crate::client::{ChatClient, Message, Role};
use crate::error::ClientError;
use crate::prompts::MINOR_ONLY_CLAUSE;

/// Starting programs for the initialization stage.
const INIT_POOL: [&str; 5] = [
    "1/max(ttc, 0.5)",
    "speed/10 + heading_align",
    "closing_speed/10 - dist/50",
    "path_cross + 1/max(ttc, 1)",
    "exp(-ttc/5) + 0.5*heading_align",
];

/// Terms the evolving mock may add. Each is a plausible risk cue.
const TERM_POOL: [&str; 14] = [
    "1/max(dist, 1)",
    "exp(-dist/20)",
    "path_cross",
    "1/max(ttc, 0.5)",
    "max(closing_speed, 0)/10",
    "dist/10",
    "heading_align",
    "speed/10",
    "exp(-min_dist/10)",
    "abs(lateral_offset)/5",
    "rel_speed/10",
    "path_cross*exp(-dist/30)",
    "min_dist/10",
    "clip(ahead, -30, 30)/30",
];

const MAX_TERMS: usize = 5;

enum Mode {
    Scripted(Vec<String>),
    Evolving,
}

pub struct DeterministicMock {
    seed: u64,
    calls: usize,
    mode: Mode,
}

impl DeterministicMock {
    /// Plays a program-editing agent: proposes and applies random edits.
    pub fn evolving(seed: u64) -> Self {
        Self {
            seed,
            calls: 0,
            mode: Mode::Evolving,
        }
    }

    /// Returns `replies` in order, repeating the last one when exhausted.
    pub fn scripted<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self {
            seed: 0,
            calls: 0,
            mode: Mode::Scripted(replies.into_iter().map(Into::into).collect()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl ChatClient for DeterministicMock {
    fn send(&mut self, messages: &[Message], _temperature: f64) -> Result<String, ClientError> {
        let k = self.calls;
        self.calls += 1;
        match &self.mode {
            Mode::Scripted(replies) => replies
                .get(k)
                .or(replies.last())
                .cloned()
                .ok_or_else(|| ClientError::Protocol("scripted mock has no replies".into())),
            Mode::Evolving => Ok(evolve_reply(messages, self.seed, k)),
        }
    }
}

fn rng_for(messages: &[Message], seed: u64, call: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((call as u64).to_le_bytes());
    for m in messages {
        h.update([m.role as u8]);
        h.update(m.content.as_bytes());
        h.update([0]);
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn evolve_reply(messages: &[Message], seed: u64, call: usize) -> String {
    let mut rng = rng_for(messages, seed, call);
    let prompt = messages
        .iter()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("");
    let minor = prompt.contains(MINOR_ONLY_CLAUSE);
    let current = current_function(prompt);
    if prompt.starts_with("Stage: reflection") {
        let p = current.unwrap_or_else(|| ScoreProgram::parse("dist").expect("literal program"));
        let s = propose(&p, minor, &mut rng);
        format!("The current ranking misses some vehicles that end up in conflicts.\n<suggestion>{s}</suggestion>")
    } else if prompt.starts_with("Stage: modification") {
        let p = current.unwrap_or_else(|| ScoreProgram::parse("dist").expect("literal program"));
        let s = prompt
            .find("## Suggestion")
            .map(|i| extract_suggestion(&prompt[i..]))
            .unwrap_or_default();
        let next = apply(&p, &s).unwrap_or(p);
        format!("Updated function:\n```dsl\n{}\n```", next.pretty())
    } else {
        let pick = INIT_POOL.choose(&mut rng).expect("non-empty pool");
        format!("A vehicle is dangerous when it can reach the ego soon.\n```dsl\n{pick}\n```")
    }
}

/// The program in the first fenced block after the "Current function" header.
fn current_function(prompt: &str) -> Option<ScoreProgram> {
    let at = prompt.find("## Current function")?;
    ScoreProgram::parse(first_fenced_block(&prompt[at..])?).ok()
}

/// Top-level additive terms with their signs.
fn split_terms(e: &Expr) -> Vec<(bool, Expr)> {
    match e {
        Expr::Bin(BinOp::Add, a, b) => {
            let mut v = split_terms(a);
            v.push((true, (**b).clone()));
            v
        }
        Expr::Bin(BinOp::Sub, a, b) => {
            let mut v = split_terms(a);
            v.push((false, (**b).clone()));
            v
        }
        _ => vec![(true, e.clone())],
    }
}

fn join_terms(terms: Vec<(bool, Expr)>) -> Expr {
    let mut it = terms.into_iter();
    let (pos, first) = it.next().expect("at least one term");
    let mut acc = if pos { first } else { Expr::Neg(Box::new(first)) };
    for (pos, t) in it {
        acc = Expr::bin(if pos { BinOp::Add } else { BinOp::Sub }, acc, t);
    }
    acc
}

fn round3(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let mag = 10f64.powi(2 - v.abs().log10().floor() as i32);
    (v * mag).round() / mag
}

fn propose(p: &ScoreProgram, minor: bool, rng: &mut ChaCha8Rng) -> String {
    let n_lits = p.ast.literals().len();
    let scale = |rng: &mut ChaCha8Rng| {
        if n_lits == 0 {
            // Nothing to tune; a zero-change suggestion.
            return "scale coefficient 0 by 1".to_string();
        }
        let k = rng.random_range(0..n_lits);
        let f = round3(rng.random_range(0.5..2.0));
        format!("scale coefficient {k} by {f}")
    };
    if minor {
        return scale(rng);
    }
    let n_terms = split_terms(&p.ast).len();
    let roll: f64 = rng.random();
    let term = |rng: &mut ChaCha8Rng| {
        let t = TERM_POOL.choose(rng).expect("non-empty pool");
        let c = [0.2, 0.5, 1.0, 2.0, 5.0].choose(rng).copied().expect("non-empty");
        let sign = if rng.random_bool(0.6) { "add" } else { "subtract" };
        (sign, format!("{c}*({t})"))
    };
    if roll < 0.3 {
        scale(rng)
    } else if roll < 0.65 && n_terms < MAX_TERMS {
        let (sign, t) = term(rng);
        format!("{sign} term `{t}`")
    } else if roll < 0.8 && n_terms > 1 {
        format!("remove term {}", rng.random_range(0..n_terms))
    } else {
        let (sign, t) = term(rng);
        format!("replace term {} with {sign} `{t}`", rng.random_range(0..n_terms))
    }
}

fn backticked(s: &str) -> Option<&str> {
    let a = s.find('`')?;
    let b = s[a + 1..].find('`')? + a + 1;
    Some(&s[a + 1..b])
}

/// Applies a suggestion in the mock's own phrasing; `None` if not understood.
fn apply(p: &ScoreProgram, suggestion: &str) -> Option<ScoreProgram> {
    let words: Vec<&str> = suggestion.split_whitespace().collect();
    let mut terms = split_terms(&p.ast);
    match words.as_slice() {
        ["scale", "coefficient", k, "by", f, ..] => {
            let k: usize = k.parse().ok()?;
            let f: f64 = f.parse().ok()?;
            let mut i = 0;
            let ast = p.ast.map_literals(&mut |v| {
                let out = if i == k { round3(v * f) } else { v };
                i += 1;
                out
            });
            Some(ScoreProgram::from_ast(ast))
        }
        [sign @ ("add" | "subtract"), "term", ..] => {
            let t = adversim_core::identifier::dsl::parse_expr(backticked(suggestion)?).ok()?;
            terms.push((*sign == "add", t));
            Some(ScoreProgram::from_ast(join_terms(terms)))
        }
        ["remove", "term", k, ..] => {
            let k: usize = k.parse().ok()?;
            if terms.len() < 2 || k >= terms.len() {
                return None;
            }
            terms.remove(k);
            Some(ScoreProgram::from_ast(join_terms(terms)))
        }
        ["replace", "term", k, "with", sign, ..] => {
            let k: usize = k.parse().ok()?;
            let t = adversim_core::identifier::dsl::parse_expr(backticked(suggestion)?).ok()?;
            *terms.get_mut(k)? = (*sign == "add", t);
            Some(ScoreProgram::from_ast(join_terms(terms)))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(s: &str) -> ScoreProgram {
        ScoreProgram::parse(s).unwrap()
    }

    #[test]
    fn edits_apply() {
        let p = prog("2*dist - path_cross");
        assert_eq!(apply(&p, "scale coefficient 0 by 1.5").unwrap().pretty(), "3 * dist - path_cross");
        assert_eq!(apply(&p, "add term `speed`").unwrap().pretty(), "2 * dist - path_cross + speed");
        assert_eq!(apply(&p, "remove term 0").unwrap().pretty(), "-path_cross");
        assert_eq!(apply(&p, "replace term 1 with add `ttc`").unwrap().pretty(), "2 * dist + ttc");
        assert!(apply(&p, "do something clever").is_none());
    }

    #[test]
    fn minor_proposals_keep_structure() {
        let p = prog("0.5*dist + exp(-ttc/5)");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = propose(&p, true, &mut rng);
            assert_eq!(apply(&p, &s).unwrap().structure_hash, p.structure_hash, "{s}");
        }
    }

    #[test]
    fn replies_are_pure() {
        let msgs = [Message::user("Stage: initialization")];
        let a = evolve_reply(&msgs, 4, 0);
        assert_eq!(a, evolve_reply(&msgs, 4, 0));
        let mut m = DeterministicMock::evolving(4);
        assert_eq!(m.send(&msgs, 0.0).unwrap(), a);
        assert_eq!(m.calls(), 1);
    }
}
