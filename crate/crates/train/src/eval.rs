//! Testing pass: crash rate and route completion of a frozen policy under
//! the normal, one-attacker and two-attacker conditions.

use adversim_core::attack::{attack_scenario, PlanMode};
use adversim_core::identifier::IdentifierMethod;
use adversim_core::metrics::mean_half_variance;
use adversim_core::sim::{rollout, EgoAgent};
use adversim_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::policy::{Policy, PolicyAgent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Normal,
    OneAttacker,
    TwoAttackers,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Normal, Condition::OneAttacker, Condition::TwoAttackers];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::OneAttacker => "one_attacker",
            Condition::TwoAttackers => "two_attackers",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn attackers(self) -> usize {
        match self {
            Condition::Normal => 0,
            Condition::OneAttacker => 1,
            Condition::TwoAttackers => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub condition: Condition,
    pub episodes: usize,
    pub crashes: usize,
    pub crash_rate: f64,
    pub route_completion: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub conditions: Vec<ConditionMetrics>,
}

impl EvalMetrics {
    pub fn get(&self, c: Condition) -> Option<&ConditionMetrics> {
        self.conditions.iter().find(|m| m.condition == c)
    }
}

/// Runs every scenario of `test` once per condition with the policy in
/// deterministic mode. Attacks are planned against the policy's own clean
/// rollout.
pub fn evaluate(
    policy: &mut dyn Policy,
    test: &[Scenario],
    conditions: &[Condition],
    method: &IdentifierMethod,
) -> Result<EvalMetrics, TrainError> {
    evaluate_agent(&mut PolicyAgent::new(policy, false), test, conditions, method)
}

/// [`evaluate`] for any ego agent, e.g. log replay.
pub fn evaluate_agent(
    agent: &mut dyn EgoAgent,
    test: &[Scenario],
    conditions: &[Condition],
    method: &IdentifierMethod,
) -> Result<EvalMetrics, TrainError> {
    let mut out = EvalMetrics::default();
    for &c in conditions {
        let mut crashes = 0usize;
        let mut completion = 0.0;
        for s in test {
            let r = match c {
                Condition::Normal => rollout(s, &mut *agent, None)?,
                _ => attack_scenario(s, method, c.attackers(), &mut *agent, PlanMode::Optimize)?.result,
            };
            crashes += r.collided as usize;
            completion += r.route_completion;
        }
        let n = test.len().max(1) as f64;
        out.conditions.push(ConditionMetrics {
            condition: c,
            episodes: test.len(),
            crashes,
            crash_rate: crashes as f64 / n,
            route_completion: completion / n,
        });
    }
    Ok(out)
}

/// Mean and half of the sample variance over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub condition: Condition,
    pub runs: usize,
    pub crash_rate: f64,
    pub crash_spread: f64,
    pub route_completion: f64,
    pub completion_spread: f64,
}

pub fn aggregate(runs: &[EvalMetrics]) -> Vec<AggregateMetrics> {
    let mut conds: Vec<Condition> = runs.iter().flat_map(|r| r.conditions.iter().map(|m| m.condition)).collect();
    conds.sort();
    conds.dedup();
    conds
        .into_iter()
        .map(|c| {
            let ms: Vec<&ConditionMetrics> = runs.iter().filter_map(|r| r.get(c)).collect();
            let crash: Vec<f64> = ms.iter().map(|m| m.crash_rate).collect();
            let comp: Vec<f64> = ms.iter().map(|m| m.route_completion).collect();
            let (cm, cs) = mean_half_variance(&crash).unwrap_or((0.0, 0.0));
            let (rm, rs) = mean_half_variance(&comp).unwrap_or((0.0, 0.0));
            AggregateMetrics {
                condition: c,
                runs: ms.len(),
                crash_rate: cm,
                crash_spread: cs,
                route_completion: rm,
                completion_spread: rs,
            }
        })
        .collect()
}
