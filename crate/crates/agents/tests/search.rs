use std::collections::HashMap;

use adversim_agents::{
    read_logs_jsonl, run_identifier_search, run_search_with, test_sim, write_logs_jsonl, AgentError, ChatClient,
    ClientError, DeterministicMock, Evaluator, Message, SearchConfig, SearchError,
};
use adversim_core::attack::{attack_scenario, PlanMode};
use adversim_core::corpus::{generate_corpus, TemplateWeights};
use adversim_core::identifier::{IdentifierMethod, ScoreProgram};
use adversim_core::sim::{rollout, ReplayAgent};

/// Scores a program by its first literal, so scripted replies pick their own score.
struct LiteralEval {
    full: HashMap<String, f64>,
}

impl LiteralEval {
    fn new() -> Self {
        Self { full: HashMap::new() }
    }
}

impl Evaluator for LiteralEval {
    fn small_eval(&mut self, p: &ScoreProgram) -> Result<f64, AgentError> {
        Ok(p.ast.literals().first().copied().unwrap_or(0.0))
    }
    fn full_eval(&mut self, p: &ScoreProgram) -> Result<f64, AgentError> {
        Ok(*self.full.get(&p.pretty()).unwrap_or(&p.ast.literals().first().copied().unwrap_or(0.0)))
    }
}

fn fenced(src: &str) -> String {
    format!("```dsl\n{src}\n```")
}

fn cfg(z: usize, q: usize) -> SearchConfig {
    SearchConfig {
        iterations: z,
        candidates_per_iter: q,
        ..Default::default()
    }
}

#[test]
fn fixed_program_is_returned() {
    let good = fenced("0.9*path_cross");
    let mut mock = DeterministicMock::scripted([good.as_str()]);
    let out = run_search_with(&cfg(1, 3), &mut mock, &mut LiteralEval::new()).unwrap();
    assert_eq!(out.best.pretty(), "0.9 * path_cross");
    assert_eq!(out.logs.len(), 2);
}

#[test]
fn early_break_skips_remaining_candidates() {
    let q = 6;
    for k in 1..=q {
        // Candidates before k score below e_0 = 0.4; candidate k scores e_0 + 0.05.
        let mut replies = vec![fenced("0.1*dist")];
        for j in 1..=q {
            replies.push("<suggestion>try</suggestion>".into());
            let lit = if j == k { 0.45 } else { 0.3 };
            replies.push(fenced(&format!("{lit}*dist")));
        }
        let mut mock = DeterministicMock::scripted(replies);
        let out = run_search_with(&cfg(1, q), &mut mock, &mut LiteralEval::new()).unwrap();
        assert_eq!(mock.calls(), 1 + 2 * k, "k={k}");
        let it = &out.logs[1];
        assert_eq!(it.candidates.len(), k);
        assert!(it.candidates[k - 1].accepted);
        assert_eq!(it.small_eval, 0.45);
    }
}

#[test]
fn without_improvement_the_best_candidate_wins_lowest_index() {
    let mut replies = vec![fenced("0.1*dist")];
    for lit in [0.2, 0.35, 0.1, 0.35] {
        replies.push("<suggestion>try</suggestion>".into());
        replies.push(fenced(&format!("{lit}*dist + speed")));
    }
    // The tie at 0.35 is resolved by the structure of candidate 2 vs 4.
    replies[8] = fenced("0.35*dist - speed");
    let mut mock = DeterministicMock::scripted(replies);
    let out = run_search_with(&cfg(1, 4), &mut mock, &mut LiteralEval::new()).unwrap();
    let it = &out.logs[1];
    assert_eq!(it.candidates.len(), 4);
    assert!(it.candidates.iter().all(|c| !c.accepted));
    assert_eq!(it.selected, "0.35 * dist + speed");
    assert_eq!(it.small_eval, 0.35);
}

struct Recorder {
    inner: DeterministicMock,
    prompts: Vec<String>,
}

impl ChatClient for Recorder {
    fn send(&mut self, m: &[Message], t: f64) -> Result<String, ClientError> {
        self.prompts.push(m[1].content.clone());
        self.inner.send(m, t)
    }
}

#[test]
fn memory_holds_every_earlier_iteration() {
    let mut c = Recorder {
        inner: DeterministicMock::evolving(5),
        prompts: Vec::new(),
    };
    let out = run_search_with(&cfg(4, 2), &mut c, &mut LiteralEval::new()).unwrap();
    let counts: Vec<usize> = c
        .prompts
        .iter()
        .filter(|p| p.starts_with("Stage: reflection"))
        .map(|p| p.matches("(success rate ").count())
        .collect();
    let expected: Vec<usize> = out.logs[1..]
        .iter()
        .flat_map(|l| std::iter::repeat_n(l.iteration - 1, l.candidates.len()))
        .collect();
    assert_eq!(counts, expected);
    // Every memory entry shows a selected program with its full-eval rate.
    let last = c.prompts.iter().rev().find(|p| p.starts_with("Stage: reflection")).unwrap();
    for (i, l) in out.logs[..out.logs.len() - 2].iter().enumerate() {
        assert!(
            last.contains(&format!("Function {i} (success rate {:.4}):\n```dsl\n{}\n```", l.full_eval, l.selected)),
            "entry {i}"
        );
    }
}

#[test]
fn generation_failure_aborts_with_partial_logs() {
    let mut mock = DeterministicMock::scripted([fenced("0.1*dist"), "<suggestion>x</suggestion>".into(), "garbage".into()]);
    match run_search_with(&cfg(2, 3), &mut mock, &mut LiteralEval::new()) {
        Err(SearchError::Aborted { iteration: 1, logs, source: AgentError::Generation { .. } }) => {
            assert_eq!(logs.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_config_is_rejected() {
    let mut mock = DeterministicMock::evolving(0);
    for bad in [cfg(0, 3), cfg(1, 1), SearchConfig { initial_baseline: 1.0, ..cfg(1, 3) }] {
        assert!(matches!(run_search_with(&bad, &mut mock, &mut LiteralEval::new()), Err(SearchError::Config(_))));
    }
    assert_eq!(mock.calls(), 0);
}

#[test]
fn simulated_search_is_deterministic_and_respects_local_opt() {
    let train = generate_corpus(31, 30, &TemplateWeights::uniform()).unwrap();
    let c = SearchConfig {
        iterations: 3,
        candidates_per_iter: 6,
        test_subsample: 10,
        seed: 31,
        ..Default::default()
    };
    let run = || run_identifier_search(&c, &mut DeterministicMock::evolving(2), &train.scenarios).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.logs, b.logs);
    assert_eq!(a.best, b.best);

    for w in a.logs.windows(2) {
        let (prev, it) = (&w[0], &w[1]);
        assert!(it.candidates.len() <= c.candidates_per_iter);
        assert_eq!(it.baseline, prev.small_eval);
        assert_eq!(it.local_opt, prev.full_eval >= c.local_opt_threshold);
        if it.candidates.last().is_some_and(|x| x.accepted) {
            assert!(it.small_eval > prev.small_eval);
        }
        for cand in &it.candidates {
            assert_eq!(cand.minor_only, it.local_opt && cand.index <= c.candidates_per_iter / 2);
            if cand.minor_only && cand.error.is_none() {
                assert_eq!(cand.structure_hash, prev.selected_hash);
            }
        }
    }
    let top = a.logs.iter().map(|l| l.full_eval).fold(f64::MIN, f64::max);
    assert_eq!(a.best_full_eval, top);
    let first = a.logs.iter().find(|l| l.full_eval == top).unwrap();
    assert_eq!(first.iteration, a.best_iteration);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("search.jsonl");
    write_logs_jsonl(&path, &a.logs).unwrap();
    assert_eq!(read_logs_jsonl(&path).unwrap(), a.logs);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), a.logs.len());
}

#[test]
fn test_sim_counts_collisions() {
    let set = generate_corpus(8, 20, &TemplateWeights::uniform()).unwrap();
    let f = ScoreProgram::parse("-dist").unwrap();
    let method = IdentifierMethod::Program(f.clone());
    let mut hits = 0;
    for s in &set.scenarios {
        let a = attack_scenario(s, &method, 1, &mut ReplayAgent::new(), PlanMode::Optimize).unwrap();
        hits += a.result.collided as usize;
    }
    let e = test_sim(&f, &set.scenarios, 1, &mut ReplayAgent::new(), PlanMode::Optimize).unwrap();
    assert_eq!(e, hits as f64 / 20.0);

    // Clean replays with no overrides never collide.
    for s in &set.scenarios {
        assert!(!rollout(s, &mut ReplayAgent::new(), None).unwrap().collided);
    }
    assert_eq!(test_sim(&f, &set.scenarios, 1, &mut ReplayAgent::new(), PlanMode::Null).unwrap(), 0.0);
}
