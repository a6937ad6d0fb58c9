use serde::{Deserialize, Serialize};

use super::observe::{observe, Observation};
use super::{detect_collision, inverse_bicycle, reward_terms, step_bicycle, AgentAction, SimConfig, StepEvents};
use crate::error::SimError;
use crate::plan::AdversarialPlan;
use crate::scenario::{Dims, Scenario, Track, VehicleState};

/// Distance (m) from the route end at which the driving task counts as done.
pub const FINISH_TOLERANCE: f64 = 1.0;

/// What the ego does for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EgoCommand {
    /// Apply a control through the bicycle model.
    Act(AgentAction),
    /// Place the ego at a given state (log replay).
    Replay(VehicleState),
}

/// Anything that can drive the ego vehicle through a rollout.
pub trait EgoAgent {
    fn reset(&mut self, _scenario: &Scenario) {}
    fn command(&mut self, step: usize, ego: &VehicleState, obs: &Observation) -> EgoCommand;
}

/// Re-emits the logged ego track.
#[derive(Debug, Clone, Default)]
pub struct ReplayAgent {
    log: Vec<VehicleState>,
}

impl ReplayAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EgoAgent for ReplayAgent {
    fn reset(&mut self, scenario: &Scenario) {
        self.log = scenario.ego.samples.clone();
    }

    fn command(&mut self, step: usize, ego: &VehicleState, _obs: &Observation) -> EgoCommand {
        match self.log.get(step + 1) {
            Some(s) => EgoCommand::Replay(*s),
            None => EgoCommand::Replay(*ego),
        }
    }
}

impl<A: EgoAgent + ?Sized> EgoAgent for &mut A {
    fn reset(&mut self, scenario: &Scenario) {
        (**self).reset(scenario)
    }
    fn command(&mut self, step: usize, ego: &VehicleState, obs: &Observation) -> EgoCommand {
        (**self).command(step, ego, obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Collision,
    Offroad,
    Finished,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub observation: Observation,
    pub action: AgentAction,
    pub reward: f64,
    pub route_completion: f64,
    pub events: StepEvents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub ego_track: Track,
    pub collided: bool,
    pub collision_step: Option<usize>,
    /// Id of the vehicle the ego hit, if any.
    pub collided_with: Option<u32>,
    pub offroad: bool,
    pub route_completion: f64,
    pub total_return: f64,
    pub end: EndReason,
    pub per_step: Vec<StepRecord>,
    /// Observation after the last step (bootstrap target for learners).
    pub final_observation: Observation,
}

impl RolloutResult {
    pub fn to_json(&self) -> String {
        crate::io::to_canonical_string(&serde_json::to_value(self).expect("rollout serializes"))
    }
}

struct Background<'a> {
    track: &'a Track,
    plan: Option<&'a crate::plan::PlannedTrajectory>,
}

impl Background<'_> {
    fn state(&self, step: usize) -> VehicleState {
        if let Some(p) = self.plan {
            if let Some(s) = p.state_at_step(step) {
                return s;
            }
        }
        let i = step.min(self.track.samples.len() - 1);
        self.track.samples[i]
    }
}

/// Rollout with the default simulator configuration.
pub fn rollout(
    scenario: &Scenario,
    agent: &mut dyn EgoAgent,
    overrides: Option<&AdversarialPlan>,
) -> Result<RolloutResult, SimError> {
    rollout_with(scenario, agent, overrides, &SimConfig::default())
}

/// Steps the ego through `agent` and background vehicles through their logs
/// (or plan overrides from each override's start step) until collision,
/// off-road (when configured), route end or horizon.
pub fn rollout_with(
    scenario: &Scenario,
    agent: &mut dyn EgoAgent,
    overrides: Option<&AdversarialPlan>,
    cfg: &SimConfig,
) -> Result<RolloutResult, SimError> {
    let horizon = scenario.horizon_steps;
    if let Some(plan) = overrides {
        for (id, p) in &plan.selections {
            if scenario.background_track(*id).is_none() {
                return Err(SimError::UnknownOverride(*id));
            }
            if p.start_step >= horizon {
                return Err(SimError::OverrideStart {
                    vehicle_id: *id,
                    start: p.start_step,
                    horizon,
                });
            }
        }
    }
    let background: Vec<Background> = scenario
        .background
        .iter()
        .map(|t| Background {
            track: t,
            plan: overrides.and_then(|p| p.selections.get(&t.vehicle_id)),
        })
        .collect();
    let others_at = |step: usize| -> Vec<(VehicleState, Dims)> {
        background.iter().map(|b| (b.state(step), b.track.dims)).collect()
    };

    let route = scenario.route_polyline();
    let route_len = route.length().max(1e-9);
    let ego_dims = scenario.ego.dims;
    let dt = scenario.dt;

    agent.reset(scenario);
    let mut ego = scenario.ego.samples[0];
    let mut ego_samples = vec![ego];
    let mut s_prev = route.project(ego.position).s;
    let mut best_s = s_prev;
    let mut per_step = Vec::with_capacity(horizon);
    let mut total_return = 0.0;
    let mut collided_with = None;
    let mut offroad_any = false;
    let mut end = EndReason::Horizon;
    let mut others = others_at(0);

    for step in 0..horizon.saturating_sub(1) {
        let obs = observe(&ego, ego_dims, &others, &scenario.road, &route);
        let (next, action) = match agent.command(step, &ego, &obs) {
            EgoCommand::Act(a) => {
                let a = a.clamped();
                (step_bicycle(&ego, a, cfg, dt), a)
            }
            EgoCommand::Replay(s) => (s, inverse_bicycle(&ego, &s, cfg, dt).clamped()),
        };
        others = others_at(step + 1);
        collided_with = background
            .iter()
            .zip(&others)
            .find(|(_, (s, d))| detect_collision(&next, ego_dims, s, *d))
            .map(|(b, _)| b.track.vehicle_id);
        let offroad = !scenario.road.drivable_area.contains(next.position);
        offroad_any |= offroad;
        let s_now = route.project(next.position).s;
        best_s = best_s.max(s_now);
        let finished = route_len - best_s <= FINISH_TOLERANCE;
        let events = StepEvents {
            collided: collided_with.is_some(),
            offroad,
            finished,
        };
        let r = reward_terms(s_now - s_prev, next.speed, events);
        total_return += r;
        per_step.push(StepRecord {
            observation: obs,
            action,
            reward: r,
            route_completion: (best_s / route_len).clamp(0.0, 1.0),
            events,
        });
        ego = next;
        ego_samples.push(ego);
        s_prev = s_now;
        if events.collided {
            end = EndReason::Collision;
            break;
        }
        if offroad && cfg.offroad_terminates {
            end = EndReason::Offroad;
            break;
        }
        if finished {
            end = EndReason::Finished;
            break;
        }
    }

    let final_observation = observe(&ego, ego_dims, &others, &scenario.road, &route);
    let collided = collided_with.is_some();
    Ok(RolloutResult {
        ego_track: Track::new(scenario.ego.vehicle_id, ego_samples, ego_dims),
        collided,
        collision_step: collided.then_some(per_step.len()),
        collided_with,
        offroad: offroad_any,
        route_completion: per_step.last().map_or(0.0, |r| r.route_completion),
        total_return,
        end,
        per_step,
        final_observation,
    })
}

/// Pads a (possibly truncated) trajectory to `len` samples by holding the
/// last state at rest.
pub fn pad_trajectory(samples: &[VehicleState], len: usize) -> Vec<VehicleState> {
    let mut out: Vec<VehicleState> = samples.iter().take(len).copied().collect();
    if let Some(last) = out.last().copied() {
        let held = VehicleState {
            speed: 0.0,
            accel: 0.0,
            ..last
        };
        out.resize(len, held);
    }
    out
}
