//! One attacked episode: identify attackers, plan their trajectories against
//! the predicted ego, then roll the real ego out through the plan.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{ego_predict, plan_attack, EgoSource};
use crate::error::{AdversaryError, IdentifyError, SimError};
use crate::identifier::{identify, IdentifierMethod};
use crate::plan::AdversarialPlan;
use crate::scenario::{Scenario, VehicleState};
use crate::sim::{rollout_with, EgoAgent, RolloutResult, SimConfig};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Identify(#[from] IdentifyError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Whether the selected attackers actually get trajectory overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    #[default]
    Optimize,
    /// Attackers are identified but keep their logged behavior.
    Null,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub attackers: Vec<u32>,
    pub plan: AdversarialPlan,
    pub result: RolloutResult,
}

/// Runs one attack. `egos` are the ego hypotheses used for planning.
pub fn attack_with_hypotheses(
    scenario: &Scenario,
    method: &IdentifierMethod,
    n_attackers: usize,
    egos: &[(Vec<VehicleState>, f64)],
    agent: &mut dyn EgoAgent,
    mode: PlanMode,
    cfg: &SimConfig,
) -> Result<AttackOutcome, AttackError> {
    let attackers = identify(scenario, method, n_attackers)?;
    let plan = match mode {
        PlanMode::Optimize => plan_attack(scenario, &attackers, egos)?,
        PlanMode::Null => AdversarialPlan::default(),
    };
    let result = rollout_with(scenario, agent, Some(&plan), cfg)?;
    Ok(AttackOutcome { attackers, plan, result })
}

/// Runs one attack, predicting the ego by a clean rollout of the same agent.
pub fn attack_scenario(
    scenario: &Scenario,
    method: &IdentifierMethod,
    n_attackers: usize,
    agent: &mut dyn EgoAgent,
    mode: PlanMode,
) -> Result<AttackOutcome, AttackError> {
    let egos = match mode {
        PlanMode::Optimize => ego_predict(EgoSource::Policy(&mut *agent), scenario)?,
        PlanMode::Null => Vec::new(),
    };
    attack_with_hypotheses(scenario, method, n_attackers, &egos, agent, mode, &SimConfig::default())
}

/// Fraction of `scenarios` in which the ego collides under attack.
pub fn attack_rate(
    scenarios: &[Scenario],
    method: &IdentifierMethod,
    n_attackers: usize,
    agent: &mut dyn EgoAgent,
    mode: PlanMode,
) -> Result<f64, AttackError> {
    if scenarios.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for s in scenarios {
        hits += attack_scenario(s, method, n_attackers, agent, mode)?.result.collided as usize;
    }
    Ok(hits as f64 / scenarios.len() as f64)
}
