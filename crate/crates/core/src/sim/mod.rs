//! Deterministic 2D simulator: kinematic bicycle transitions, box collision,
//! ray sensing, reward and full-episode rollouts.

mod observe;
mod rollout;

pub use observe::{observe, raycast, Observation, NAV_LOOKAHEAD, NUM_RAYS, RAY_RANGE};
pub use rollout::{
    pad_trajectory, rollout, rollout_with, EgoAgent, EgoCommand, EndReason, ReplayAgent, RolloutResult,
    StepRecord,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Polyline, Vec2};
use crate::scenario::{Dims, VehicleState};

/// Normalized control input. Both components live in [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentAction {
    pub steer: f64,
    pub accel_cmd: f64,
}

impl AgentAction {
    /// Builds an action with both components clamped to [−1, 1]; NaN maps to 0.
    pub fn new(steer: f64, accel_cmd: f64) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Self {
            steer: c(steer),
            accel_cmd: c(accel_cmd),
        }
    }

    pub fn clamped(self) -> Self {
        Self::new(self.steer, self.accel_cmd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub a_max: f64,
    pub a_brake: f64,
    pub max_steer_angle: f64,
    pub wheelbase: f64,
    pub offroad_terminates: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            a_max: 3.0,
            a_brake: 6.0,
            max_steer_angle: 0.5,
            wheelbase: 2.8,
            offroad_terminates: true,
        }
    }
}

impl SimConfig {
    /// Physical acceleration for a normalized command.
    pub fn accel_of(&self, cmd: f64) -> f64 {
        if cmd >= 0.0 {
            cmd * self.a_max
        } else {
            cmd * self.a_brake
        }
    }

    /// Normalized command for a physical acceleration (unclamped).
    pub fn cmd_of(&self, accel: f64) -> f64 {
        if accel >= 0.0 {
            accel / self.a_max
        } else {
            accel / self.a_brake
        }
    }
}

/// One kinematic bicycle step. Speed is floored at zero, heading integrates
/// the rear-axle yaw rate and position advances by the mean speed along the
/// mean heading.
pub fn step_bicycle(state: &VehicleState, action: AgentAction, cfg: &SimConfig, dt: f64) -> VehicleState {
    let action = action.clamped();
    let a = cfg.accel_of(action.accel_cmd);
    let speed = (state.speed + a * dt).max(0.0);
    let delta = action.steer * cfg.max_steer_angle;
    let dh = state.speed / cfg.wheelbase * delta.tan() * dt;
    let mean_heading = state.heading + 0.5 * dh;
    let dist = 0.5 * (state.speed + speed) * dt;
    VehicleState {
        position: state.position + Vec2::from_angle(mean_heading) * dist,
        heading: normalize_angle(state.heading + dh),
        speed,
        accel: (speed - state.speed) / dt,
    }
}

/// Action that moves `prev` to `next` under [`step_bicycle`], before clamping.
/// Steering is undefined at standstill and reported as zero.
pub fn inverse_bicycle(prev: &VehicleState, next: &VehicleState, cfg: &SimConfig, dt: f64) -> AgentAction {
    let accel_cmd = cfg.cmd_of((next.speed - prev.speed) / dt);
    let steer = if prev.speed > 1e-6 {
        let dh = normalize_angle(next.heading - prev.heading);
        (dh * cfg.wheelbase / (prev.speed * dt)).atan() / cfg.max_steer_angle
    } else {
        0.0
    };
    AgentAction { steer, accel_cmd }
}

/// Oriented-rectangle overlap of two vehicles (separating axis test).
pub fn detect_collision(a: &VehicleState, a_dims: Dims, b: &VehicleState, b_dims: Dims) -> bool {
    a.footprint(a_dims).overlaps(&b.footprint(b_dims))
}

/// Events that close a simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepEvents {
    pub collided: bool,
    pub offroad: bool,
    pub finished: bool,
}

pub const W_PROGRESS: f64 = 1.0;
pub const W_SPEED: f64 = 0.1;
pub const SPEED_SCALE: f64 = 10.0;
pub const OFFROAD_PENALTY: f64 = 5.0;
pub const COLLISION_PENALTY: f64 = 10.0;
pub const FINISH_BONUS: f64 = 10.0;

/// Reward from route progress (m), current speed and step events.
pub fn reward_terms(progress: f64, speed: f64, events: StepEvents) -> f64 {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    W_PROGRESS * progress + W_SPEED * (speed / SPEED_SCALE)
        - OFFROAD_PENALTY * flag(events.offroad)
        - COLLISION_PENALTY * flag(events.collided)
        + FINISH_BONUS * flag(events.finished)
}

/// Step reward for the ego moving from `prev` to `cur` along `route`.
pub fn reward(route: &Polyline, prev: &VehicleState, cur: &VehicleState, events: StepEvents) -> f64 {
    let progress = route.project(cur.position).s - route.project(prev.position).s;
    reward_terms(progress, cur.speed, events)
}
