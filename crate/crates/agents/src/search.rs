//! The search loop: initialize, then per iteration generate up to Q
//! candidates through reflection and modification, keep the first one that
//! beats the incumbent on the small test, else the best of all Q.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use adversim_core::adversary::{ego_predict, generate_candidates, select_adversarial, CandidateSet, EgoSource};
use adversim_core::attack::{attack_rate, AttackError, PlanMode};
use adversim_core::identifier::{identify, IdentifierMethod, ScoreProgram};
use adversim_core::sim::{rollout, EgoAgent, ReplayAgent};
use adversim_core::{Scenario, VehicleState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{function_init, function_modi, function_refl, Memory};
use crate::client::ChatClient;
use crate::error::{AgentError, SearchError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Z, number of iterations after initialization.
    pub iterations: usize,
    /// Q, candidate budget per iteration.
    pub candidates_per_iter: usize,
    /// e_0, the small-test score the first iteration has to beat.
    pub initial_baseline: f64,
    /// Full-eval rate at which the first half of the candidates become
    /// coefficient-only edits.
    pub local_opt_threshold: f64,
    pub test_subsample: usize,
    /// Scenarios used for the full evaluation; 0 means all.
    pub full_eval_size: usize,
    pub n_attackers: usize,
    /// Seeds the small-test subsample.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 8,
            candidates_per_iter: 11,
            initial_baseline: 0.4,
            local_opt_threshold: 0.6,
            test_subsample: 20,
            full_eval_size: 0,
            n_attackers: 1,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if self.candidates_per_iter < 2 {
            return bad("candidates_per_iter must be at least 2");
        }
        for (name, v) in [
            ("initial_baseline", self.initial_baseline),
            ("local_opt_threshold", self.local_opt_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(&format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.test_subsample == 0 {
            return bad("test_subsample must be positive");
        }
        if self.n_attackers == 0 {
            return bad("n_attackers must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    /// 1-based position j within the iteration.
    pub index: usize,
    pub minor_only: bool,
    pub suggestion: String,
    /// Empty when modification failed.
    pub program: String,
    pub structure_hash: String,
    pub small_eval: Option<f64>,
    pub accepted: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// e_{i-1}, the small-test score candidates had to beat.
    pub baseline: f64,
    pub local_opt: bool,
    pub candidates: Vec<CandidateLog>,
    pub selected: String,
    pub selected_hash: String,
    pub small_eval: f64,
    pub full_eval: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: ScoreProgram,
    pub best_full_eval: f64,
    pub best_iteration: usize,
    pub logs: Vec<IterationLog>,
}

/// Scores a program on the small test subsample and on the full set.
pub trait Evaluator {
    fn small_eval(&mut self, program: &ScoreProgram) -> Result<f64, AgentError>;
    fn full_eval(&mut self, program: &ScoreProgram) -> Result<f64, AgentError>;
}

/// Attack success rate of `f` over `scenarios`.
pub fn test_sim(
    f: &ScoreProgram,
    scenarios: &[Scenario],
    n_attackers: usize,
    agent: &mut dyn EgoAgent,
    mode: PlanMode,
) -> Result<f64, AgentError> {
    Ok(attack_rate(scenarios, &IdentifierMethod::Program(f.clone()), n_attackers, agent, mode)?)
}

/// Simulation-backed evaluator. Candidate sets, ego predictions and episode
/// outcomes are cached per scenario, which is sound because the ego agent is
/// reset at every rollout and so depends only on the attacker set.
pub struct SimEvaluator {
    scenarios: Vec<Scenario>,
    small: Vec<usize>,
    full: Vec<usize>,
    n_attackers: usize,
    agent: Box<dyn EgoAgent>,
    egos: HashMap<usize, Vec<(Vec<VehicleState>, f64)>>,
    candidates: HashMap<(usize, u32), CandidateSet>,
    outcomes: HashMap<(usize, Vec<u32>), bool>,
}

impl SimEvaluator {
    pub fn new(cfg: &SearchConfig, scenarios: Vec<Scenario>, agent: Box<dyn EgoAgent>) -> Self {
        let n = scenarios.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut small = if cfg.test_subsample >= n {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, cfg.test_subsample).into_vec()
        };
        small.sort_unstable();
        let full_n = if cfg.full_eval_size == 0 { n } else { cfg.full_eval_size.min(n) };
        Self {
            scenarios,
            small,
            full: (0..full_n).collect(),
            n_attackers: cfg.n_attackers,
            agent,
            egos: HashMap::new(),
            candidates: HashMap::new(),
            outcomes: HashMap::new(),
        }
    }

    /// Evaluator against the log-replay ego.
    pub fn replay(cfg: &SearchConfig, scenarios: Vec<Scenario>) -> Self {
        Self::new(cfg, scenarios, Box::new(ReplayAgent::new()))
    }

    pub fn small_indices(&self) -> &[usize] {
        &self.small
    }

    fn episode(&mut self, idx: usize, method: &IdentifierMethod) -> Result<bool, AttackError> {
        let s = &self.scenarios[idx];
        let mut ids = identify(s, method, self.n_attackers)?;
        ids.sort_unstable();
        if let Some(hit) = self.outcomes.get(&(idx, ids.clone())) {
            return Ok(*hit);
        }
        if !self.egos.contains_key(&idx) {
            let e = ego_predict(EgoSource::Policy(self.agent.as_mut()), s)?;
            self.egos.insert(idx, e);
        }
        let mut sets = Vec::with_capacity(ids.len());
        for id in &ids {
            if let Entry::Vacant(e) = self.candidates.entry((idx, *id)) {
                e.insert(generate_candidates(s, *id, s.attack_start)?);
            }
            sets.push(self.candidates[&(idx, *id)].clone());
        }
        let plan = select_adversarial(&sets, &self.egos[&idx], s.ego.dims)?;
        let hit = rollout(s, self.agent.as_mut(), Some(&plan))?.collided;
        self.outcomes.insert((idx, ids), hit);
        Ok(hit)
    }

    fn rate(&mut self, program: &ScoreProgram, small: bool) -> Result<f64, AgentError> {
        let method = IdentifierMethod::Program(program.clone());
        let idxs = if small { self.small.clone() } else { self.full.clone() };
        if idxs.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for i in &idxs {
            hits += self.episode(*i, &method)? as usize;
        }
        Ok(hits as f64 / idxs.len() as f64)
    }
}

impl Evaluator for SimEvaluator {
    fn small_eval(&mut self, program: &ScoreProgram) -> Result<f64, AgentError> {
        self.rate(program, true)
    }
    fn full_eval(&mut self, program: &ScoreProgram) -> Result<f64, AgentError> {
        self.rate(program, false)
    }
}

/// Search against the log-replay ego on `train`.
pub fn run_identifier_search(
    cfg: &SearchConfig,
    client: &mut dyn ChatClient,
    train: &[Scenario],
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let mut eval = SimEvaluator::replay(cfg, train.to_vec());
    run_search_with(cfg, client, &mut eval)
}

pub fn run_search_with(
    cfg: &SearchConfig,
    client: &mut dyn ChatClient,
    eval: &mut dyn Evaluator,
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let mut logs: Vec<IterationLog> = Vec::new();
    macro_rules! abort {
        ($i:expr, $e:expr) => {
            return Err(SearchError::Aborted {
                iteration: $i,
                source: $e,
                logs,
            })
        };
    }

    let f0 = match function_init(client) {
        Ok(p) => p,
        Err(e) => abort!(0, e),
    };
    let e0_full = match eval.full_eval(&f0) {
        Ok(v) => v,
        Err(e) => abort!(0, e),
    };
    logs.push(IterationLog {
        iteration: 0,
        baseline: cfg.initial_baseline,
        local_opt: false,
        candidates: Vec::new(),
        selected: f0.pretty(),
        selected_hash: f0.structure_hash.clone(),
        small_eval: cfg.initial_baseline,
        full_eval: e0_full,
    });

    let mut memory = Memory::default();
    let (mut f_prev, mut e_prev, mut full_prev) = (f0.clone(), cfg.initial_baseline, e0_full);
    let mut best = (f0, e0_full, 0usize);
    let q = cfg.candidates_per_iter;

    for i in 1..=cfg.iterations {
        let local_opt = full_prev >= cfg.local_opt_threshold;
        let mut cands: Vec<CandidateLog> = Vec::new();
        let mut programs: Vec<Option<ScoreProgram>> = Vec::new();
        let mut chosen: Option<usize> = None;
        for j in 1..=q {
            let minor = local_opt && j <= q / 2;
            let suggestion = match function_refl(client, &memory, &f_prev, full_prev, minor) {
                Ok(s) => s,
                Err(e) => abort!(i, e),
            };
            let mut log = CandidateLog {
                index: j,
                minor_only: minor,
                suggestion: suggestion.clone(),
                program: String::new(),
                structure_hash: String::new(),
                small_eval: None,
                accepted: false,
                error: None,
            };
            match function_modi(client, &f_prev, &suggestion, minor) {
                Ok(p) => {
                    let e = match eval.small_eval(&p) {
                        Ok(v) => v,
                        Err(e) => abort!(i, e),
                    };
                    log.program = p.pretty();
                    log.structure_hash = p.structure_hash.clone();
                    log.small_eval = Some(e);
                    programs.push(Some(p));
                    if e > e_prev {
                        log.accepted = true;
                        cands.push(log);
                        chosen = Some(j - 1);
                        break;
                    }
                }
                // A coefficient-only edit that kept changing structure costs
                // this candidate slot, not the run.
                Err(err @ AgentError::StructureViolation { .. }) => {
                    log.error = Some(err.to_string());
                    programs.push(None);
                }
                Err(err) => abort!(i, err),
            }
            cands.push(log);
        }
        if chosen.is_none() {
            // Best of all Q; lowest index wins ties.
            let mut top: Option<(usize, f64)> = None;
            for (k, c) in cands.iter().enumerate() {
                if let Some(e) = c.small_eval {
                    if top.is_none_or(|(_, b)| e > b) {
                        top = Some((k, e));
                    }
                }
            }
            chosen = top.map(|t| t.0);
        }
        let (f_i, e_i) = match chosen {
            Some(k) => (
                programs[k].clone().expect("evaluated candidate has a program"),
                cands[k].small_eval.expect("evaluated"),
            ),
            // Every candidate failed; keep the incumbent.
            None => (f_prev.clone(), e_prev),
        };
        let full_i = match eval.full_eval(&f_i) {
            Ok(v) => v,
            Err(e) => abort!(i, e),
        };
        log::info!("iteration {i}: small {e_i:.3} full {full_i:.3} `{}`", f_i.pretty());
        logs.push(IterationLog {
            iteration: i,
            baseline: e_prev,
            local_opt,
            candidates: cands,
            selected: f_i.pretty(),
            selected_hash: f_i.structure_hash.clone(),
            small_eval: e_i,
            full_eval: full_i,
        });
        if full_i > best.1 {
            best = (f_i.clone(), full_i, i);
        }
        memory.push(&f_prev, full_prev);
        (f_prev, e_prev, full_prev) = (f_i, e_i, full_i);
    }

    Ok(SearchOutcome {
        best: best.0,
        best_full_eval: best.1,
        best_iteration: best.2,
        logs,
    })
}

/// One JSON object per line, one line per iteration.
pub fn write_logs_jsonl(path: impl AsRef<Path>, logs: &[IterationLog]) -> Result<(), SearchError> {
    let path = path.as_ref();
    let io = |source| SearchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for l in logs {
        writeln!(f, "{}", serde_json::to_string(l).expect("log serializes")).map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_logs_jsonl(path: impl AsRef<Path>) -> Result<Vec<IterationLog>, SearchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SearchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| SearchError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })
        })
        .collect()
}
