//! `run.json`: the summary every command leaves in its output directory, and
//! the only input the report command reads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adversim_core::io::to_canonical_string;
use adversim_core::report::{RealismRow, Report, Series, SuccessRow, TrainingRow};
use adversim_train::{AggregateMetrics, Condition, EvalMetrics, Snapshot};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunRecord {
    Attack {
        run_id: String,
        config_hash: String,
        seed: u64,
        method: String,
        attackers: usize,
        agent: String,
        scenarios: usize,
        success_rate: f64,
        seconds_per_scenario: f64,
        accel_kl: f64,
        jerk_rate: f64,
    },
    Search {
        run_id: String,
        config_hash: String,
        seed: u64,
        best: String,
        best_full_eval: f64,
        best_iteration: usize,
        /// Full-set success rate of the selected program per iteration.
        full_evals: Vec<f64>,
    },
    Train {
        run_id: String,
        config_hash: String,
        seeds: Vec<u64>,
        dataset: String,
        runs: Vec<EvalMetrics>,
        aggregate: Vec<AggregateMetrics>,
        curves: Vec<Vec<Snapshot>>,
    },
    Eval {
        run_id: String,
        config_hash: String,
        seed: u64,
        dataset: String,
        metrics: EvalMetrics,
    },
}

impl RunRecord {
    pub fn run_id(&self) -> &str {
        match self {
            RunRecord::Attack { run_id, .. }
            | RunRecord::Search { run_id, .. }
            | RunRecord::Train { run_id, .. }
            | RunRecord::Eval { run_id, .. } => run_id,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(RUN_FILE);
        let v = serde_json::to_value(self).expect("record serializes");
        std::fs::write(&path, to_canonical_string(&v)).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Accepts either a `run.json` path or the directory holding one.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = if path.is_dir() { path.join(RUN_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", file.display())))
    }
}

/// Short content id: first 12 hex digits of sha256 over `parts`.
pub fn run_id(kind: &str, parts: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    for p in parts {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    format!("{kind}-{}", &hex::encode(h.finalize())[..12])
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes");
    hex::encode(Sha256::digest(to_canonical_string(&v).as_bytes()))
}

fn training_rows(run_id: &str, dataset: &str, agg: &[AggregateMetrics]) -> Vec<TrainingRow> {
    agg.iter()
        .map(|a| TrainingRow {
            run_id: run_id.into(),
            dataset: dataset.into(),
            condition: a.condition.name().into(),
            crash_rate: a.crash_rate,
            crash_spread: a.crash_spread,
            route_completion: a.route_completion,
            completion_spread: a.completion_spread,
        })
        .collect()
}

/// Folds run records into report tables, in the order given.
pub fn build_report(records: &[RunRecord]) -> Report {
    let mut r = Report::default();
    let mut prov = BTreeMap::new();
    for rec in records {
        match rec {
            RunRecord::Attack {
                run_id,
                config_hash,
                seed,
                method,
                attackers,
                agent,
                scenarios,
                success_rate,
                seconds_per_scenario,
                accel_kl,
                jerk_rate,
            } => {
                r.success.push(SuccessRow {
                    run_id: run_id.clone(),
                    method: method.clone(),
                    attackers: *attackers,
                    agent: agent.clone(),
                    success_rate: *success_rate,
                    scenarios: *scenarios,
                    seconds_per_scenario: *seconds_per_scenario,
                });
                r.realism.push(RealismRow {
                    run_id: run_id.clone(),
                    method: format!("{method} (n={attackers})"),
                    accel_kl: *accel_kl,
                    jerk_rate: *jerk_rate,
                });
                prov.insert(run_id.clone(), format!("config {config_hash} seed {seed}"));
            }
            RunRecord::Search {
                run_id,
                config_hash,
                seed,
                full_evals,
                ..
            } => {
                r.search_curves.push(Series {
                    name: run_id.clone(),
                    points: full_evals.iter().enumerate().map(|(i, e)| (i as f64, *e)).collect(),
                });
                prov.insert(run_id.clone(), format!("config {config_hash} seed {seed}"));
            }
            RunRecord::Train {
                run_id,
                config_hash,
                seeds,
                dataset,
                aggregate,
                curves,
                ..
            } => {
                r.training.extend(training_rows(run_id, dataset, aggregate));
                // Curves of the first repeat only; later repeats share the layout.
                if let Some(first) = curves.first() {
                    for c in Condition::ALL {
                        let pts: Vec<Snapshot> = first.iter().filter(|s| s.condition == c).cloned().collect();
                        if pts.is_empty() {
                            continue;
                        }
                        r.training_curves.push(Series {
                            name: format!("{dataset} {} crash", c.name()),
                            points: pts.iter().map(|s| (s.step as f64, s.crash_rate)).collect(),
                        });
                        r.training_curves.push(Series {
                            name: format!("{dataset} {} completion", c.name()),
                            points: pts.iter().map(|s| (s.step as f64, s.route_completion)).collect(),
                        });
                    }
                }
                let seeds: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
                prov.insert(run_id.clone(), format!("config {config_hash} seeds {}", seeds.join(",")));
            }
            RunRecord::Eval {
                run_id,
                config_hash,
                seed,
                dataset,
                metrics,
            } => {
                let agg = adversim_train::aggregate(std::slice::from_ref(metrics));
                r.training.extend(training_rows(run_id, dataset, &agg));
                prov.insert(run_id.clone(), format!("config {config_hash} seed {seed}"));
            }
        }
    }
    r.provenance = prov;
    r
}
