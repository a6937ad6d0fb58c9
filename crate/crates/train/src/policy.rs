//! Driving policies and their adapter to the simulator.

use adversim_core::sim::{AgentAction, EgoAgent, EgoCommand, Observation, NUM_RAYS, RAY_RANGE};
use adversim_core::{Scenario, VehicleState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::td3::{learner_rng, Losses, ReplayBuffer, Td3, Td3Config};

pub const OBS_DIM: usize = 5 + 2 * NUM_RAYS;
pub const ACT_DIM: usize = 2;

/// Scaled observation vector fed to the networks. Besides the current rays
/// it carries their change since `prev`, so closing traffic is visible
/// from a single input; the change is zero on the first step.
pub fn encode_obs(o: &Observation, prev: Option<&Observation>) -> Vec<f32> {
    let mut v = Vec::with_capacity(OBS_DIM);
    v.push((o.ego_speed / 10.0) as f32);
    v.push(o.heading_error as f32);
    v.push((o.lateral_offset / 3.0).clamp(-5.0, 5.0) as f32);
    v.push((o.nav_distance / 10.0).min(5.0) as f32);
    v.push(o.nav_bearing as f32);
    v.extend(o.rays.iter().map(|r| (r / RAY_RANGE) as f32));
    let before = prev.unwrap_or(o);
    v.extend(o.rays.iter().zip(&before.rays).map(|(r, p)| (r - p).clamp(-3.0, 3.0) as f32));
    v
}

pub fn encode_action(a: AgentAction) -> Vec<f32> {
    vec![a.steer as f32, a.accel_cmd as f32]
}

pub fn decode_action(v: &[f32]) -> AgentAction {
    AgentAction::new(v[0] as f64, v[1] as f64)
}

pub trait Policy {
    /// Clears per-episode memory.
    fn reset(&mut self) {}
    /// With `explore == false` the action depends only on the parameters and
    /// the observations seen since the last reset.
    fn act(&mut self, obs: &Observation, explore: bool) -> AgentAction;
    fn learn(&mut self, replay: &ReplayBuffer) -> Losses;
}

/// TD3 actor-critic as a driving policy.
#[derive(Debug, Clone)]
pub struct Td3Policy {
    pub learner: Td3,
    explore_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    explored_steps: usize,
    prev: Option<Observation>,
}

impl Td3Policy {
    pub fn new(cfg: Td3Config, seed: u64) -> Self {
        let mut init = learner_rng(seed, 1);
        Self {
            learner: Td3::new(OBS_DIM, ACT_DIM, cfg, &mut init),
            explore_rng: learner_rng(seed, 2),
            update_rng: learner_rng(seed, 3),
            explored_steps: 0,
            prev: None,
        }
    }

    pub fn config(&self) -> &Td3Config {
        &self.learner.cfg
    }
}

impl Policy for Td3Policy {
    fn reset(&mut self) {
        self.prev = None;
    }

    fn act(&mut self, obs: &Observation, explore: bool) -> AgentAction {
        let x = encode_obs(obs, self.prev.as_ref());
        self.prev = Some(*obs);
        if !explore {
            return decode_action(&self.learner.act(&x));
        }
        self.explored_steps += 1;
        let cfg = &self.learner.cfg;
        if self.explored_steps <= cfg.random_steps {
            let r = &mut self.explore_rng;
            return AgentAction::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        }
        let noise = Normal::new(0.0f32, cfg.explore_noise.max(1e-12)).expect("valid std");
        let sigma = cfg.explore_noise;
        let a: Vec<f32> = self
            .learner
            .act(&x)
            .into_iter()
            .map(|v| if sigma > 0.0 { v + noise.sample(&mut self.explore_rng) } else { v })
            .collect();
        decode_action(&a)
    }

    fn learn(&mut self, replay: &ReplayBuffer) -> Losses {
        self.learner.update(replay, &mut self.update_rng)
    }
}

/// Drives the ego with a policy.
pub struct PolicyAgent<'a> {
    pub policy: &'a mut dyn Policy,
    pub explore: bool,
}

impl<'a> PolicyAgent<'a> {
    pub fn new(policy: &'a mut dyn Policy, explore: bool) -> Self {
        Self { policy, explore }
    }
}

impl EgoAgent for PolicyAgent<'_> {
    fn reset(&mut self, _scenario: &Scenario) {
        self.policy.reset();
    }

    fn command(&mut self, _step: usize, _ego: &VehicleState, obs: &Observation) -> EgoCommand {
        EgoCommand::Act(self.policy.act(obs, self.explore))
    }
}
