//! Attacker trajectory overrides produced by the adversary optimizer and
//! consumed by the rollout engine.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::scenario::VehicleState;
use crate::sim::{step_bicycle, AgentAction, SimConfig};

/// A replacement trajectory for one background vehicle, starting at
/// `start_step` with the vehicle's logged state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrajectory {
    pub start_step: usize,
    pub maneuver: String,
    pub states: Vec<VehicleState>,
    /// Controls that produce `states[k + 1]` from `states[k]`.
    pub actions: Vec<AgentAction>,
}

impl PlannedTrajectory {
    /// State at absolute scenario `step`; holds the last state past the end.
    pub fn state_at_step(&self, step: usize) -> Option<VehicleState> {
        if step < self.start_step {
            return None;
        }
        let i = (step - self.start_step).min(self.states.len().saturating_sub(1));
        self.states.get(i).copied()
    }

    /// Largest state deviation when the stored controls are re-integrated
    /// from the first state with clamping applied.
    pub fn replay_deviation(&self, cfg: &SimConfig, dt: f64) -> f64 {
        let Some(first) = self.states.first() else {
            return 0.0;
        };
        let mut s = *first;
        let mut worst: f64 = 0.0;
        for (k, a) in self.actions.iter().enumerate() {
            s = step_bicycle(&s, a.clamped(), cfg, dt);
            if let Some(want) = self.states.get(k + 1) {
                worst = worst
                    .max(s.position.distance(want.position))
                    .max((s.heading - want.heading).abs())
                    .max((s.speed - want.speed).abs());
            }
        }
        worst
    }
}

/// Chosen attacker trajectories, keyed by vehicle id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdversarialPlan {
    pub selections: BTreeMap<u32, PlannedTrajectory>,
    /// Achieved value of each attacker's selection objective.
    pub objective: BTreeMap<u32, f64>,
}

impl AdversarialPlan {
    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    pub fn to_json(&self) -> String {
        crate::io::to_canonical_string(&serde_json::to_value(self).expect("plan serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| ScenarioError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        Self::from_json(&text)
    }
}
