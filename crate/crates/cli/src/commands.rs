//! Subcommand implementations. Each writes its artifacts plus a `run.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use adversim_agents::{
    run_identifier_search, write_logs_jsonl, ChatClient, DeterministicMock, HttpClient, SearchError,
};
use adversim_core::attack::{attack_scenario, PlanMode};
use adversim_core::identifier::{rank, save_program, IdentifierMethod, ProgramRecord};
use adversim_core::io::{load_scenario, load_set, save_set, to_canonical_string};
use adversim_core::metrics::plan_realism;
use adversim_core::report::{emit_report, Format};
use adversim_core::sim::{EgoAgent, ReplayAgent};
use adversim_core::Split;
use adversim_train::checkpoint::CheckpointMeta;
use adversim_train::{
    aggregate, curves_csv, evaluate, load_checkpoint, save_checkpoint, train_adversarial, TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{parse_conditions, read_toml, CorpusSpec, MethodSpec, SearchFile, TrainFile};
use crate::error::CliError;
use crate::record::{build_report, hash_json, run_id, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "adversim", version, about = "Adversarial scenario generation and training for driving policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario set.
    GenCorpus {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Rank background vehicles of one scenario and print the chosen attackers.
    Identify {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        n_attackers: usize,
    },
    /// Plan and run attacks over a scenario set.
    Attack {
        #[arg(long)]
        set: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        n_attackers: usize,
        #[arg(long, value_enum, default_value = "replay")]
        agent: AgentKind,
        /// Policy checkpoint, required with `--agent policy`.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for an identifier program with a chat backend.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "mock")]
        client: ClientKind,
        #[arg(long)]
        out: PathBuf,
        /// Overrides both the search seed and the mock seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train an ego policy, optionally against planned attacks.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Test a checkpoint under normal and attacked conditions.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value = "normal,one_attacker,two_attackers")]
        conditions: String,
        #[command(flatten)]
        method: MethodArgs,
        /// Label for the report's training table.
        #[arg(long, default_value = "eval")]
        dataset: String,
        /// Directory for `run.json`; metrics are always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect run directories into tables and charts.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json,csv,svg")]
        formats: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// random, min_ttc, kinetic_field or program.
    #[arg(long, default_value = "kinetic_field")]
    pub method: String,
    /// Inline program source for `--method program`.
    #[arg(long)]
    pub program: Option<String>,
    #[arg(long)]
    pub program_file: Option<PathBuf>,
    /// Seed of the random identifier.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl MethodArgs {
    fn resolve(&self) -> Result<IdentifierMethod, CliError> {
        MethodSpec {
            method: self.method.clone(),
            program: self.program.clone(),
            program_file: self.program_file.clone(),
            seed: self.seed,
        }
        .resolve(Path::new("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    Replay,
    Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClientKind {
    Mock,
    Http,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus { seed, n, out, split } => gen_corpus(seed, n, &split, &out),
        Command::Identify {
            scenario,
            method,
            n_attackers,
        } => identify(&scenario, &method, n_attackers),
        Command::Attack {
            set,
            method,
            n_attackers,
            agent,
            ckpt,
            out,
        } => attack(&set, &method, n_attackers, agent, ckpt.as_deref(), &out),
        Command::Search {
            config,
            client,
            out,
            seed,
        } => search(&config, client, &out, seed),
        Command::Train { config, out, seed } => train(&config, &out, seed),
        Command::Eval {
            ckpt,
            set,
            conditions,
            method,
            dataset,
            out,
        } => eval(&ckpt, &set, &conditions, &method, &dataset, out.as_deref()),
        Command::Report { runs, out, formats } => report(&runs, &out, &formats),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn file_sha(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Identifier description used for hashing; includes the program text.
fn method_desc(m: &IdentifierMethod) -> String {
    match m {
        IdentifierMethod::Random { seed } => format!("random:{seed}"),
        IdentifierMethod::Program(p) => format!("program:{}", p.source),
        other => other.name().into(),
    }
}

fn method_seed(m: &IdentifierMethod) -> u64 {
    match m {
        IdentifierMethod::Random { seed } => *seed,
        _ => 0,
    }
}

pub fn gen_corpus(seed: u64, n: usize, split: &str, out: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Validation("--n must be positive".into()));
    }
    let split = Split::parse(split).ok_or_else(|| CliError::Validation(format!("unknown split `{split}`")))?;
    let set = CorpusSpec::generated(seed, n, split).load(Path::new("."))?;
    save_set(&set, out)?;
    log::info!("wrote {} scenarios to {}", set.len(), out.display());
    Ok(())
}

pub fn identify(scenario: &Path, method: &MethodArgs, n: usize) -> Result<(), CliError> {
    let s = load_scenario(scenario)?;
    let m = method.resolve()?;
    let attackers = adversim_core::identifier::identify(&s, &m, n)?;
    let scores: Vec<_> = rank(&s, &m)?.into_iter().map(|(id, v)| json!([id, v])).collect();
    let v = json!({
        "scenario": s.id,
        "method": m.name(),
        "attackers": attackers,
        "ranking": scores,
    });
    println!("{}", to_canonical_string(&v));
    Ok(())
}

pub fn attack(
    set: &Path,
    method: &MethodArgs,
    n: usize,
    agent: AgentKind,
    ckpt: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let set = load_set(set)?;
    let m = method.resolve()?;
    let mut policy = match (agent, ckpt) {
        (AgentKind::Policy, Some(p)) => Some(load_checkpoint(p)?.0),
        (AgentKind::Policy, None) => return Err(CliError::Validation("--agent policy needs --ckpt".into())),
        (AgentKind::Replay, Some(_)) => return Err(CliError::Validation("--ckpt only applies to --agent policy".into())),
        (AgentKind::Replay, None) => None,
    };
    let agent_name = match agent {
        AgentKind::Replay => "replay",
        AgentKind::Policy => "policy",
    };
    let ckpt_sha = ckpt.map(file_sha).transpose()?.unwrap_or_default();
    let ids: Vec<&str> = set.scenarios.iter().map(|s| s.id.as_str()).collect();
    let config_hash = hash_json(&json!({
        "method": method_desc(&m),
        "attackers": n,
        "agent": agent_name,
        "checkpoint": ckpt_sha,
        "scenarios": ids,
    }));

    let plans_dir = out.join("plans");
    let rollouts_dir = out.join("rollouts");
    create_dir(&plans_dir)?;
    create_dir(&rollouts_dir)?;
    let mut replay = ReplayAgent::new();
    let mut policy_agent = policy.as_mut().map(|p| adversim_train::PolicyAgent::new(p, false));
    let ego: &mut dyn EgoAgent = match policy_agent.as_mut() {
        Some(a) => a,
        None => &mut replay,
    };
    let mut plans = Vec::new();
    let mut hits = 0usize;
    let started = Instant::now();
    for s in &set.scenarios {
        let o = attack_scenario(s, &m, n, &mut *ego, PlanMode::Optimize)?;
        o.plan.save(plans_dir.join(format!("{}.json", s.id)))?;
        write_file(&rollouts_dir.join(format!("{}.json", s.id)), &o.result.to_json())?;
        hits += o.result.collided as usize;
        plans.push(o.plan);
    }
    let seconds = started.elapsed().as_secs_f64() / set.len() as f64;
    let (accel_kl, jerk_rate) = plan_realism(&plans, &set.scenarios)?;
    let rec = RunRecord::Attack {
        run_id: run_id("attack", &[&config_hash]),
        config_hash,
        seed: method_seed(&m),
        method: m.name().into(),
        attackers: n,
        agent: agent_name.into(),
        scenarios: set.len(),
        success_rate: hits as f64 / set.len() as f64,
        seconds_per_scenario: seconds,
        accel_kl,
        jerk_rate,
    };
    rec.save(out)?;
    if let RunRecord::Attack { success_rate, .. } = &rec {
        log::info!("{}: success rate {success_rate:.3} over {} scenarios", rec.run_id(), set.len());
    }
    Ok(())
}

pub fn search(config: &Path, client: ClientKind, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut file: SearchFile = read_toml(config)?;
    if let Some(s) = seed {
        file.search.seed = s;
        file.mock_seed = s;
    }
    file.search.validate()?;
    let base = config.parent().unwrap_or(Path::new("."));
    let train = file.corpus.load(base)?;
    let mut chat: Box<dyn ChatClient> = match client {
        ClientKind::Mock => Box::new(DeterministicMock::evolving(file.mock_seed)),
        ClientKind::Http => Box::new(HttpClient::from_env()?),
    };
    create_dir(out)?;
    let log_path = out.join("search.jsonl");
    let outcome = match run_identifier_search(&file.search, &mut *chat, &train.scenarios) {
        Ok(o) => o,
        Err(SearchError::Aborted { iteration, source, logs }) => {
            // Keep what was completed before the backend failed.
            write_logs_jsonl(&log_path, &logs)?;
            return Err(SearchError::Aborted { iteration, source, logs }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_logs_jsonl(&log_path, &outcome.logs)?;
    let full_evals: Vec<f64> = outcome.logs.iter().map(|l| l.full_eval).collect();
    save_program(out, "best", &ProgramRecord::new(&outcome.best, full_evals.clone()))?;
    let config_hash = hash_json(&json!({
        "file": file,
        "client": format!("{client:?}").to_lowercase(),
    }));
    let rec = RunRecord::Search {
        run_id: run_id("search", &[&config_hash]),
        config_hash,
        seed: file.search.seed,
        best: outcome.best.source.clone(),
        best_full_eval: outcome.best_full_eval,
        best_iteration: outcome.best_iteration,
        full_evals,
    };
    rec.save(out)?;
    log::info!("best `{}` full eval {:.3}", outcome.best.source, outcome.best_full_eval);
    Ok(())
}

pub fn train(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut file: TrainFile = read_toml(config)?;
    if let Some(s) = seed {
        file.train.seed = s;
    }
    if file.repeats == 0 {
        return Err(CliError::Validation("repeats must be at least 1".into()));
    }
    file.train.validate()?;
    let base = config.parent().unwrap_or(Path::new("."));
    let method = file.identifier.resolve(base)?;
    let train_set = file.train_corpus.load(base)?;
    let test_set = file.test_corpus.load(base)?;
    create_dir(out)?;

    let mut runs = Vec::new();
    let mut curves = Vec::new();
    let mut seeds = Vec::new();
    for r in 0..file.repeats {
        let cfg = TrainConfig {
            seed: file.train.seed + r as u64,
            ..file.train.clone()
        };
        let mut o = train_adversarial(&cfg, &train_set.scenarios, &test_set.scenarios, &method)?;
        let meta = CheckpointMeta {
            step: o.steps,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            learner: cfg.learner.clone(),
        };
        save_checkpoint(out.join(format!("policy-{}.ckpt", cfg.seed)), &o.policy, &meta)?;
        write_file(&out.join(format!("curves-{}.csv", cfg.seed)), &curves_csv(&o.curves))?;
        let metrics = evaluate(&mut o.policy, &test_set.scenarios, &file.conditions, &method)?;
        log::info!(
            "seed {}: {} episodes ({} attacked), {:?}",
            cfg.seed,
            o.episodes,
            o.adversarial_episodes,
            metrics.conditions.iter().map(|c| (c.condition.name(), c.crash_rate)).collect::<Vec<_>>()
        );
        runs.push(metrics);
        curves.push(o.curves);
        seeds.push(cfg.seed);
    }
    let config_hash = hash_json(&file);
    let rec = RunRecord::Train {
        run_id: run_id("train", &[&config_hash]),
        config_hash,
        seeds,
        dataset: file.dataset.clone(),
        aggregate: aggregate(&runs),
        runs,
        curves,
    };
    rec.save(out)?;
    Ok(())
}

pub fn eval(
    ckpt: &Path,
    set: &Path,
    conditions: &str,
    method: &MethodArgs,
    dataset: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (mut policy, meta) = load_checkpoint(ckpt)?;
    let set = load_set(set)?;
    let conditions = parse_conditions(conditions)?;
    let m = method.resolve()?;
    let metrics = evaluate(&mut policy, &set.scenarios, &conditions, &m)?;
    println!(
        "{}",
        to_canonical_string(&serde_json::to_value(&metrics).expect("metrics serialize"))
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        let ids: Vec<&str> = set.scenarios.iter().map(|s| s.id.as_str()).collect();
        let config_hash = hash_json(&json!({
            "checkpoint": file_sha(ckpt)?,
            "method": method_desc(&m),
            "conditions": conditions,
            "scenarios": ids,
        }));
        RunRecord::Eval {
            run_id: run_id("eval", &[&config_hash]),
            config_hash,
            seed: meta.seed,
            dataset: dataset.into(),
            metrics,
        }
        .save(dir)?;
    }
    Ok(())
}

pub fn report(runs: &[PathBuf], out: &Path, formats: &str) -> Result<(), CliError> {
    let formats = formats
        .split(',')
        .map(|f| Format::parse(f.trim()).ok_or_else(|| CliError::Validation(format!("unknown format `{f}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let records = runs.iter().map(|p| RunRecord::load(p)).collect::<Result<Vec<_>, _>>()?;
    let report = build_report(&records);
    for p in emit_report(&report, out, &formats)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}
