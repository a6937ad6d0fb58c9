//! Adversarial trajectory selection.
//!
//! Every attacker gets a library of kinematically feasible maneuvers rolled
//! out from its logged state at the attack step, each with a naturalness
//! prior. Given weighted hypotheses of what the ego will do, each attacker
//! independently picks the candidate maximizing prior × expected collision
//! likelihood.

use std::collections::{BTreeMap, VecDeque};

use crate::error::AdversaryError;
use crate::geometry::{normalize_angle, Polyline, Vec2};
use crate::plan::{AdversarialPlan, PlannedTrajectory};
use crate::scenario::{Dims, Scenario, VehicleState};
use crate::sim::{
    detect_collision, inverse_bicycle, pad_trajectory, rollout_with, step_bicycle, AgentAction,
    EgoAgent, SimConfig,
};

pub const MANEUVERS: [&str; 7] = [
    "maintain",
    "hard_accel",
    "hard_brake",
    "swerve_left",
    "swerve_right",
    "cut_toward_ego",
    "intercept_ego_prediction",
];
pub const SPEED_SCALES: [f64; 3] = [0.7, 1.0, 1.3];

/// Length scale of the soft collision likelihood, meters.
pub const LIKELIHOOD_SIGMA: f64 = 0.5;
const MIN_GAP: f64 = 1e-6;

const HEADING_RATE_WEIGHT: f64 = 0.5;
const ACCEL_WEIGHT: f64 = 0.2;
const SWERVE_OFFSET: f64 = 3.5;
const SWERVE_TIME: f64 = 2.5;
const CUT_TIME: f64 = 2.0;
const CUT_MAX: f64 = 6.0;
const INTERCEPT_LEAD: f64 = 1.0;
const INTERCEPT_SPEEDUP: f64 = 3.0;
const PATH_EXTENSION: f64 = 80.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub maneuver: String,
    pub speed_scale: f64,
    pub trajectory: PlannedTrajectory,
    pub naturalness_cost: f64,
    pub prior: f64,
}

impl Candidate {
    pub fn tag(&self) -> String {
        format!("{}x{}", self.maneuver, self.speed_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub attacker_id: u32,
    pub dims: Dims,
    pub start_step: usize,
    pub candidates: Vec<Candidate>,
}

/// Logged path of the attacker from the attack step, parameterized by arc
/// length, with feed-forward steering and reference headings.
struct Reference {
    line: Polyline,
    /// Arc length at each retained log sample.
    arc: Vec<f64>,
    heading: Vec<f64>,
    steer: Vec<f64>,
}

impl Reference {
    fn new(log: &[VehicleState], cfg: &SimConfig, dt: f64) -> Self {
        let mut pts = vec![log[0].position];
        let mut arc = vec![0.0];
        let mut heading = vec![log[0].heading];
        let mut steer = Vec::new();
        for w in log.windows(2) {
            let d = w[0].position.distance(w[1].position);
            let delta = inverse_bicycle(&w[0], &w[1], cfg, dt).clamped().steer;
            if d < 1e-6 {
                continue;
            }
            steer.push(delta);
            pts.push(w[1].position);
            arc.push(arc.last().unwrap() + d);
            heading.push(w[1].heading);
        }
        steer.push(0.0);
        let last = *pts.last().unwrap();
        let h = *heading.last().unwrap();
        pts.push(last + Vec2::from_angle(h) * PATH_EXTENSION);
        arc.push(arc.last().unwrap() + PATH_EXTENSION);
        heading.push(h);
        Self {
            line: Polyline::new(pts),
            arc,
            heading,
            steer,
        }
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let i = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.arc.len() - 2);
        let span = self.arc[i + 1] - self.arc[i];
        (i, ((s - self.arc[i]) / span).clamp(0.0, 1.0))
    }

    fn heading_at(&self, s: f64) -> f64 {
        let (i, u) = self.segment(s);
        let dh = normalize_angle(self.heading[i + 1] - self.heading[i]);
        normalize_angle(self.heading[i] + u * dh)
    }

    fn steer_at(&self, s: f64) -> f64 {
        let (i, _) = self.segment(s);
        self.steer.get(i).copied().unwrap_or(0.0)
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Steering command that follows the reference at lateral `offset` (left +).
fn follow(reference: &Reference, state: &VehicleState, offset: f64, cfg: &SimConfig) -> f64 {
    let proj = reference.line.project(state.position);
    let ff = reference.steer_at(proj.s) * cfg.max_steer_angle;
    let heading_err = normalize_angle(state.heading - reference.heading_at(proj.s));
    let lateral_err = proj.lateral - offset;
    let delta = ff - heading_err - (1.0 * lateral_err / (state.speed + 1.0)).atan();
    delta / cfg.max_steer_angle
}

/// Rolls out the maneuver library for `attacker_id` from step `t`.
pub fn generate_candidates(scenario: &Scenario, attacker_id: u32, t: usize) -> Result<CandidateSet, AdversaryError> {
    generate_candidates_with(scenario, attacker_id, t, &SimConfig::default())
}

pub fn generate_candidates_with(
    scenario: &Scenario,
    attacker_id: u32,
    t: usize,
    cfg: &SimConfig,
) -> Result<CandidateSet, AdversaryError> {
    let horizon = scenario.horizon_steps;
    if t >= horizon {
        return Err(AdversaryError::BadAttackStart { start: t, horizon });
    }
    let track = scenario
        .background_track(attacker_id)
        .ok_or(AdversaryError::UnknownAttacker(attacker_id))?;
    let dt = scenario.dt;
    let log = &track.samples[t..];
    let reference = Reference::new(log, cfg, dt);
    let start = log[0];
    let ego_log = &scenario.ego.samples;

    // Side of the attacker's path the ego is on at the attack step.
    let ego_lateral = reference.line.project(ego_log[t].position).lateral;
    let cut_offset = ego_lateral.clamp(-CUT_MAX, CUT_MAX);

    let mut candidates = Vec::with_capacity(MANEUVERS.len() * SPEED_SCALES.len());
    for maneuver in MANEUVERS {
        for scale in SPEED_SCALES {
            let mut states = vec![start];
            let mut actions = Vec::with_capacity(log.len().saturating_sub(1));
            for k in 0..log.len() - 1 {
                let s = states[k];
                let tau = (k + 1) as f64 * dt;
                let v_log = log[k + 1].speed;
                let ego_pred = {
                    let e = ego_log[(t + k).min(horizon - 1)];
                    reference.line.project(e.position + e.velocity() * INTERCEPT_LEAD)
                };
                let v_target = match maneuver {
                    "hard_accel" => scale * start.speed + 2.5 * tau,
                    "hard_brake" => (scale * start.speed - 5.0 * tau).max(0.0),
                    "intercept_ego_prediction" => {
                        let gap = ego_pred.s - reference.line.project(s.position).s;
                        (scale * v_log + 0.5 * gap).clamp(0.0, scale * v_log + INTERCEPT_SPEEDUP)
                    }
                    _ => scale * v_log,
                };
                let steer = match maneuver {
                    "swerve_left" => follow(&reference, &s, SWERVE_OFFSET * smoothstep(tau / SWERVE_TIME), cfg),
                    "swerve_right" => follow(&reference, &s, -SWERVE_OFFSET * smoothstep(tau / SWERVE_TIME), cfg),
                    "cut_toward_ego" => follow(&reference, &s, cut_offset * smoothstep(tau / CUT_TIME), cfg),
                    "intercept_ego_prediction" => {
                        follow(&reference, &s, ego_pred.lateral.clamp(-CUT_MAX, CUT_MAX), cfg)
                    }
                    _ => follow(&reference, &s, 0.0, cfg),
                };
                let action = AgentAction::new(steer, cfg.cmd_of((v_target - s.speed) / dt));
                actions.push(action);
                states.push(step_bicycle(&s, action, cfg, dt));
            }
            let naturalness_cost = naturalness_cost(&states, log, dt);
            candidates.push(Candidate {
                maneuver: maneuver.to_string(),
                speed_scale: scale,
                trajectory: PlannedTrajectory {
                    start_step: t,
                    maneuver: format!("{maneuver}x{scale}"),
                    states,
                    actions,
                },
                naturalness_cost,
                prior: 0.0,
            });
        }
    }
    let priors = softmax_neg(&candidates.iter().map(|c| c.naturalness_cost).collect::<Vec<_>>());
    for (c, p) in candidates.iter_mut().zip(priors) {
        c.prior = p;
    }
    Ok(CandidateSet {
        attacker_id,
        dims: track.dims,
        start_step: t,
        candidates,
    })
}

/// Integrated deviation of heading rate and acceleration from the log.
pub fn naturalness_cost(states: &[VehicleState], log: &[VehicleState], dt: f64) -> f64 {
    states
        .windows(2)
        .zip(log.windows(2))
        .map(|(c, l)| {
            let w_c = normalize_angle(c[1].heading - c[0].heading) / dt;
            let w_l = normalize_angle(l[1].heading - l[0].heading) / dt;
            (HEADING_RATE_WEIGHT * (w_c - w_l).abs() + ACCEL_WEIGHT * (c[1].accel - l[1].accel).abs()) * dt
        })
        .sum()
}

/// softmax(−x), shifted for stability.
pub fn softmax_neg(costs: &[f64]) -> Vec<f64> {
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = costs.iter().map(|c| (-(c - lo)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Recent ego rollouts per scenario with geometric recency weights.
#[derive(Debug, Clone)]
pub struct EgoBuffer {
    capacity: usize,
    decay: f64,
    entries: BTreeMap<String, VecDeque<Vec<VehicleState>>>,
}

impl Default for EgoBuffer {
    fn default() -> Self {
        Self::new(8, 0.5)
    }
}

impl EgoBuffer {
    pub fn new(capacity: usize, decay: f64) -> Self {
        assert!(capacity >= 1, "buffer capacity must be positive");
        assert!(decay > 0.0, "decay must be positive");
        Self {
            capacity,
            decay,
            entries: BTreeMap::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Adds the newest rollout, evicting the oldest at capacity.
    pub fn push(&mut self, scenario_id: &str, trajectory: Vec<VehicleState>) {
        let q = self.entries.entry(scenario_id.to_string()).or_default();
        if q.len() == self.capacity {
            q.pop_back();
        }
        q.push_front(trajectory);
    }

    pub fn len(&self, scenario_id: &str) -> usize {
        self.entries.get(scenario_id).map_or(0, |q| q.len())
    }

    pub fn is_empty(&self, scenario_id: &str) -> bool {
        self.len(scenario_id) == 0
    }

    /// Buffered trajectories, newest first, with normalized weights.
    pub fn hypotheses(&self, scenario_id: &str) -> Result<Vec<(Vec<VehicleState>, f64)>, AdversaryError> {
        let q = self
            .entries
            .get(scenario_id)
            .filter(|q| !q.is_empty())
            .ok_or_else(|| AdversaryError::EmptyBuffer(scenario_id.to_string()))?;
        let raw: Vec<f64> = (0..q.len()).map(|i| self.decay.powi(i as i32)).collect();
        let z: f64 = raw.iter().sum();
        Ok(q.iter().cloned().zip(raw.into_iter().map(|w| w / z)).collect())
    }
}

/// Source of ego hypotheses for the optimizer.
pub enum EgoSource<'a> {
    /// Training: every buffered rollout with its recency weight.
    Buffer(&'a EgoBuffer),
    /// Testing: one deterministic rollout of the policy on the normal scenario.
    Policy(&'a mut dyn EgoAgent),
}

/// Ego trajectory hypotheses, each padded to the scenario horizon.
pub fn ego_predict(source: EgoSource<'_>, scenario: &Scenario) -> Result<Vec<(Vec<VehicleState>, f64)>, AdversaryError> {
    let t = scenario.horizon_steps;
    match source {
        EgoSource::Buffer(b) => Ok(b
            .hypotheses(&scenario.id)?
            .into_iter()
            .map(|(traj, w)| (pad_trajectory(&traj, t), w))
            .collect()),
        EgoSource::Policy(agent) => {
            let r = rollout_with(scenario, agent, None, &SimConfig::default())?;
            Ok(vec![(pad_trajectory(&r.ego_track.samples, t), 1.0)])
        }
    }
}

/// Soft probability that two aligned trajectories collide: 1 on any box
/// overlap, otherwise exp(−gap/σ) with the smallest box-to-box gap.
pub fn collision_likelihood(
    y_ego: &[VehicleState],
    ego_dims: Dims,
    y_adv: &[VehicleState],
    adv_dims: Dims,
) -> Result<f64, AdversaryError> {
    if y_ego.len() != y_adv.len() {
        return Err(AdversaryError::LengthMismatch(y_ego.len(), y_adv.len()));
    }
    let mut gap = f64::INFINITY;
    for (e, a) in y_ego.iter().zip(y_adv) {
        if detect_collision(e, ego_dims, a, adv_dims) {
            return Ok(1.0);
        }
        gap = gap.min(e.footprint(ego_dims).distance_to(&a.footprint(adv_dims)));
    }
    Ok((-gap.max(MIN_GAP) / LIKELIHOOD_SIGMA).exp().max(f64::MIN_POSITIVE))
}

/// Index of the first maximum of prior × Σ_e P(e)·L(e, c) per attacker, with
/// the achieved objective.
pub fn argmax_factorized(priors: &[f64], likelihood: &[Vec<f64>], ego_weights: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (p, lik)) in priors.iter().zip(likelihood).enumerate() {
        let expected: f64 = lik.iter().zip(ego_weights).map(|(l, w)| l * w).sum();
        let v = p * expected;
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Chooses one trajectory per attacker against the weighted ego hypotheses.
/// Each hypothesis is a full-horizon ego trajectory.
pub fn select_adversarial(
    sets: &[CandidateSet],
    egos: &[(Vec<VehicleState>, f64)],
    ego_dims: Dims,
) -> Result<AdversarialPlan, AdversaryError> {
    if sets.is_empty() || egos.is_empty() || sets.iter().any(|s| s.candidates.is_empty()) {
        return Err(AdversaryError::Empty);
    }
    let weights: Vec<f64> = egos.iter().map(|(_, w)| *w).collect();
    let mut plan = AdversarialPlan::default();
    for set in sets {
        let priors: Vec<f64> = set.candidates.iter().map(|c| c.prior).collect();
        let mut lik = Vec::with_capacity(set.candidates.len());
        for c in &set.candidates {
            let row = egos
                .iter()
                .map(|(traj, _)| {
                    let end = (set.start_step + c.trajectory.states.len()).min(traj.len());
                    let ego_part = traj.get(set.start_step..end).unwrap_or(&[]);
                    collision_likelihood(ego_part, ego_dims, &c.trajectory.states, set.dims)
                })
                .collect::<Result<Vec<_>, _>>()?;
            lik.push(row);
        }
        let (best, value) = argmax_factorized(&priors, &lik, &weights);
        plan.selections.insert(set.attacker_id, set.candidates[best].trajectory.clone());
        plan.objective.insert(set.attacker_id, value);
    }
    Ok(plan)
}

/// Candidates for every attacker at the scenario's attack step, then selection.
pub fn plan_attack(
    scenario: &Scenario,
    attackers: &[u32],
    egos: &[(Vec<VehicleState>, f64)],
) -> Result<AdversarialPlan, AdversaryError> {
    let sets = attackers
        .iter()
        .map(|id| generate_candidates(scenario, *id, scenario.attack_start))
        .collect::<Result<Vec<_>, _>>()?;
    select_adversarial(&sets, egos, scenario.ego.dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x0: f64, y: f64, v: f64, n: usize) -> Vec<VehicleState> {
        (0..n)
            .map(|k| VehicleState::new(Vec2::new(x0 + v * 0.1 * k as f64, y), 0.0, v, 0.0))
            .collect()
    }

    #[test]
    fn likelihood_examples() {
        let d = Dims::default();
        let a = line(0.0, 0.0, 5.0, 10);
        assert_eq!(collision_likelihood(&a, d, &a, d).unwrap(), 1.0);
        // Side by side with 0.5 m between box edges.
        let b = line(0.0, 2.5, 5.0, 10);
        let l = collision_likelihood(&a, d, &b, d).unwrap();
        assert!((l - (-1.0f64).exp()).abs() < 1e-12, "{l}");
        assert!(matches!(
            collision_likelihood(&a, d, &b[..5], d),
            Err(AdversaryError::LengthMismatch(10, 5))
        ));
    }

    #[test]
    fn buffer_weights_and_eviction() {
        let mut b = EgoBuffer::new(3, 0.5);
        assert!(matches!(b.hypotheses("s"), Err(AdversaryError::EmptyBuffer(_))));
        for i in 0..3 {
            b.push("s", line(i as f64, 0.0, 1.0, 2));
        }
        let h = b.hypotheses("s").unwrap();
        let w: Vec<f64> = h.iter().map(|x| x.1).collect();
        assert!((w[0] - 4.0 / 7.0).abs() < 1e-12 && (w[1] - 2.0 / 7.0).abs() < 1e-12 && (w[2] - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(h[0].0[0].position.x, 2.0);
        b.push("s", line(9.0, 0.0, 1.0, 2));
        let h = b.hypotheses("s").unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(h[0].0[0].position.x, 9.0);
        assert_eq!(h[2].0[0].position.x, 1.0);
    }

    #[test]
    fn prior_beats_zero_likelihood() {
        let (i, v) = argmax_factorized(&[0.9, 0.1], &[vec![0.0], vec![1.0]], &[1.0]);
        assert_eq!(i, 1);
        assert!((v - 0.1).abs() < 1e-15);
    }
}
