//! Closed-loop training: episodes on normal or attacked scenarios, where
//! attacks are planned against the ego's recent behavior on that scenario.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;

use adversim_core::adversary::{ego_predict, generate_candidates, select_adversarial, CandidateSet, EgoBuffer, EgoSource};
use adversim_core::identifier::{identify, IdentifierMethod};
use adversim_core::sim::{pad_trajectory, rollout_with, EndReason, RolloutResult, SimConfig};
use adversim_core::Scenario;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::TrainError;
use crate::eval::{aggregate, evaluate, AggregateMetrics, Condition, EvalMetrics};
use crate::policy::{encode_action, encode_obs, Policy, PolicyAgent, Td3Policy};
use crate::td3::{learner_rng, ReplayBuffer, Td3Config, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// K_max, environment steps.
    pub max_steps: usize,
    /// Probability that an episode runs with attackers.
    pub adversarial_fraction: f64,
    pub n_attackers: usize,
    pub seed: u64,
    /// Steps between evaluation snapshots; 0 disables them.
    pub eval_every: usize,
    pub snapshot_conditions: Vec<Condition>,
    pub ego_buffer_capacity: usize,
    pub ego_buffer_decay: f64,
    pub learner: Td3Config,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 100_000,
            adversarial_fraction: 0.5,
            n_attackers: 2,
            seed: 0,
            eval_every: 1000,
            snapshot_conditions: Condition::ALL.to_vec(),
            ego_buffer_capacity: 8,
            ego_buffer_decay: 0.5,
            learner: Td3Config::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.adversarial_fraction) {
            return bad(format!("adversarial_fraction {} outside [0, 1]", self.adversarial_fraction));
        }
        if self.adversarial_fraction > 0.0 && self.n_attackers == 0 {
            return bad("n_attackers must be positive when attacks are enabled".into());
        }
        if self.ego_buffer_capacity == 0 || !(self.ego_buffer_decay > 0.0 && self.ego_buffer_decay <= 1.0) {
            return bad("ego buffer needs capacity ≥ 1 and decay in (0, 1]".into());
        }
        self.learner.validate().map_err(TrainError::Config)
    }

    /// sha256 of the config's JSON form.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(adversim_core::io::to_canonical_string(&v).as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub condition: Condition,
    pub crash_rate: f64,
    pub route_completion: f64,
}

pub struct TrainOutcome {
    pub policy: Td3Policy,
    pub curves: Vec<Snapshot>,
    pub steps: usize,
    pub episodes: usize,
    pub adversarial_episodes: usize,
    pub ego_buffer: EgoBuffer,
}

/// `step,condition,crash_rate,route_completion` rows.
pub fn curves_csv(curves: &[Snapshot]) -> String {
    let mut s = String::from("step,condition,crash_rate,route_completion\n");
    for c in curves {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", c.step, c.condition.name(), c.crash_rate, c.route_completion);
    }
    s
}

/// Turns a finished episode into learner transitions.
pub fn transitions(r: &RolloutResult) -> Vec<Transition> {
    let n = r.per_step.len();
    let terminal = matches!(r.end, EndReason::Collision | EndReason::Offroad | EndReason::Finished);
    (0..n)
        .map(|t| {
            let rec = &r.per_step[t];
            let next = r.per_step.get(t + 1).map_or(&r.final_observation, |x| &x.observation);
            let prev = t.checked_sub(1).map(|p| &r.per_step[p].observation);
            Transition {
                obs: encode_obs(&rec.observation, prev),
                action: encode_action(rec.action),
                reward: rec.reward as f32,
                next_obs: encode_obs(next, Some(&rec.observation)),
                done: terminal && t + 1 == n,
            }
        })
        .collect()
}

struct AttackCache {
    attackers: Vec<Vec<u32>>,
    candidates: HashMap<(usize, u32), CandidateSet>,
}

impl AttackCache {
    fn sets(&mut self, idx: usize, s: &Scenario) -> Result<Vec<CandidateSet>, TrainError> {
        let mut out = Vec::new();
        for id in &self.attackers[idx] {
            if let Entry::Vacant(e) = self.candidates.entry((idx, *id)) {
                e.insert(generate_candidates(s, *id, s.attack_start)?);
            }
            out.push(self.candidates[&(idx, *id)].clone());
        }
        Ok(out)
    }
}

/// Trains a fresh TD3 policy on `train`. Snapshots are evaluated on
/// `snapshot_set` every `eval_every` steps.
pub fn train_adversarial(
    cfg: &TrainConfig,
    train: &[Scenario],
    snapshot_set: &[Scenario],
    method: &IdentifierMethod,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::Config("empty training set".into()));
    }
    let attacks_on = cfg.adversarial_fraction > 0.0;
    // Attackers are fixed per scenario before training starts.
    let attackers = if attacks_on {
        train
            .iter()
            .map(|s| identify(s, method, cfg.n_attackers))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        vec![Vec::new(); train.len()]
    };
    let mut cache = AttackCache {
        attackers,
        candidates: HashMap::new(),
    };

    let sim = SimConfig::default();
    let mut policy = Td3Policy::new(cfg.learner.clone(), cfg.seed);
    let mut replay = ReplayBuffer::new(cfg.learner.replay_capacity);
    let mut buffer = EgoBuffer::new(cfg.ego_buffer_capacity, cfg.ego_buffer_decay);
    let mut rng = learner_rng(cfg.seed, 4);
    let mut curves = Vec::new();
    let (mut steps, mut episodes, mut adversarial_episodes) = (0usize, 0usize, 0usize);

    while steps < cfg.max_steps {
        let idx = rng.random_range(0..train.len());
        let s = &train[idx];
        let attacked = attacks_on && rng.random_bool(cfg.adversarial_fraction);
        let plan = if attacked {
            let egos = if buffer.is_empty(&s.id) {
                ego_predict(EgoSource::Policy(&mut PolicyAgent::new(&mut policy, false)), s)?
            } else {
                buffer.hypotheses(&s.id)?
            };
            let sets = cache.sets(idx, s)?;
            Some(select_adversarial(&sets, &egos, s.ego.dims)?)
        } else {
            None
        };
        let result = rollout_with(s, &mut PolicyAgent::new(&mut policy, true), plan.as_ref(), &sim)?;
        buffer.push(&s.id, pad_trajectory(&result.ego_track.samples, s.horizon_steps));
        episodes += 1;
        adversarial_episodes += attacked as usize;

        for t in transitions(&result) {
            if steps >= cfg.max_steps {
                break;
            }
            replay.push(t);
            steps += 1;
            if steps >= cfg.learner.learning_starts && replay.len() >= cfg.learner.batch_size {
                policy.learn(&replay);
            }
            if cfg.eval_every > 0 && steps % cfg.eval_every == 0 && !snapshot_set.is_empty() {
                let m = evaluate(&mut policy, snapshot_set, &cfg.snapshot_conditions, method)?;
                log::info!(
                    "step {steps}: {}",
                    m.conditions
                        .iter()
                        .map(|c| format!("{} crash {:.2} completion {:.2}", c.condition.name(), c.crash_rate, c.route_completion))
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                curves.extend(m.conditions.iter().map(|c| Snapshot {
                    step: steps,
                    condition: c.condition,
                    crash_rate: c.crash_rate,
                    route_completion: c.route_completion,
                }));
            }
        }
    }

    Ok(TrainOutcome {
        policy,
        curves,
        steps,
        episodes,
        adversarial_episodes,
        ego_buffer: buffer,
    })
}

pub struct RepeatOutcome {
    pub runs: Vec<EvalMetrics>,
    pub aggregate: Vec<AggregateMetrics>,
    pub curves: Vec<Vec<Snapshot>>,
}

/// Trains and tests `k` times with seeds `cfg.seed + r`.
pub fn run_repeats(
    cfg: &TrainConfig,
    k: usize,
    train: &[Scenario],
    test: &[Scenario],
    method: &IdentifierMethod,
    conditions: &[Condition],
) -> Result<RepeatOutcome, TrainError> {
    if k == 0 {
        return Err(TrainError::Config("repeat count must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(k);
    let mut curves = Vec::with_capacity(k);
    for r in 0..k {
        let c = TrainConfig {
            seed: cfg.seed + r as u64,
            ..cfg.clone()
        };
        let mut out = train_adversarial(&c, train, test, method)?;
        runs.push(evaluate(&mut out.policy, test, conditions, method)?);
        curves.push(out.curves);
    }
    Ok(RepeatOutcome {
        aggregate: aggregate(&runs),
        runs,
        curves,
    })
}
