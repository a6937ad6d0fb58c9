//! Scenario data model: road geometry, logged vehicle tracks and the route
//! the ego vehicle is asked to drive.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::{Obb, Polygon, Polyline, Vec2};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_LENGTH: f64 = 4.5;
pub const DEFAULT_WIDTH: f64 = 2.0;

/// Kinematic state of one vehicle at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    /// Radians in (−π, π].
    pub heading: f64,
    /// m/s, never negative.
    pub speed: f64,
    /// Signed longitudinal acceleration, m/s².
    pub accel: f64,
}

impl VehicleState {
    pub fn new(position: Vec2, heading: f64, speed: f64, accel: f64) -> Self {
        Self {
            position,
            heading,
            speed,
            accel,
        }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }

    pub fn footprint(&self, dims: Dims) -> Obb {
        Obb::new(self.position, self.heading, dims.length, dims.width)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.position.is_finite()
            && self.heading.is_finite()
            && self.speed.is_finite()
            && self.accel.is_finite())
        {
            return Err("non-finite state component".into());
        }
        if self.speed < 0.0 {
            return Err(format!("negative speed {}", self.speed));
        }
        if !(self.heading > -std::f64::consts::PI && self.heading <= std::f64::consts::PI) {
            return Err(format!("heading {} outside (-pi, pi]", self.heading));
        }
        Ok(())
    }
}

/// Vehicle footprint, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub length: f64,
    pub width: f64,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            length: DEFAULT_LENGTH,
            width: DEFAULT_WIDTH,
        }
    }
}

/// Logged trajectory of one vehicle, sampled at the scenario timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub vehicle_id: u32,
    pub samples: Vec<VehicleState>,
    pub dims: Dims,
}

impl Track {
    pub fn new(vehicle_id: u32, samples: Vec<VehicleState>, dims: Dims) -> Self {
        Self {
            vehicle_id,
            samples,
            dims,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stored sample at `step`.
    pub fn state_at(&self, step: usize) -> Result<VehicleState, ScenarioError> {
        self.samples
            .get(step)
            .copied()
            .ok_or(ScenarioError::Index {
                step,
                len: self.samples.len(),
            })
    }

    /// Checks the track invariants against timestep `dt`.
    pub fn validate(&self, dt: f64) -> Result<(), String> {
        if self.samples.len() < 2 {
            return Err(format!("track {} has fewer than 2 samples", self.vehicle_id));
        }
        if !(self.dims.length > 0.0 && self.dims.width > 0.0) {
            return Err(format!("track {} has non-positive dims", self.vehicle_id));
        }
        for (k, s) in self.samples.iter().enumerate() {
            s.check()
                .map_err(|e| format!("track {} step {k}: {e}", self.vehicle_id))?;
        }
        for (k, w) in self.samples.windows(2).enumerate() {
            let moved = w[0].position.distance(w[1].position);
            let slack = 2.0 * dt * w[0].speed.max(w[1].speed) + POSITION_SLACK;
            if moved > slack {
                return Err(format!(
                    "track {} step {k}->{}: moved {moved:.3} m but speed allows {slack:.3} m",
                    self.vehicle_id,
                    k + 1
                ));
            }
        }
        Ok(())
    }
}

/// Absolute slack (m) added to the speed-consistency bound between samples.
const POSITION_SLACK: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadTemplate {
    Straight,
    Ramp,
    TIntersection,
    Intersection,
}

impl RoadTemplate {
    pub const ALL: [RoadTemplate; 4] = [
        RoadTemplate::Straight,
        RoadTemplate::Ramp,
        RoadTemplate::TIntersection,
        RoadTemplate::Intersection,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RoadTemplate::Straight => "straight",
            RoadTemplate::Ramp => "ramp",
            RoadTemplate::TIntersection => "t_intersection",
            RoadTemplate::Intersection => "intersection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for RoadTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGeometry {
    pub lane_centerlines: Vec<Vec<Vec2>>,
    pub drivable_area: Polygon,
    pub template: RoadTemplate,
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<(), String> {
        if !self.drivable_area.is_simple() {
            return Err("drivable_area is not a simple polygon".into());
        }
        for (i, lane) in self.lane_centerlines.iter().enumerate() {
            if lane.len() < 2 {
                return Err(format!("lane {i} has fewer than 2 points"));
            }
            if let Some(p) = lane.iter().find(|p| !self.drivable_area.contains(**p)) {
                return Err(format!(
                    "lane {i} point ({:.3}, {:.3}) outside drivable_area",
                    p.x, p.y
                ));
            }
            for w in lane.windows(2) {
                if self.drivable_area.crosses_boundary(w[0], w[1]) {
                    return Err(format!("lane {i} crosses the drivable_area boundary"));
                }
            }
        }
        Ok(())
    }
}

/// One traffic scenario: road, ego and background tracks, route and timing.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub road: RoadGeometry,
    pub ego: Track,
    pub background: Vec<Track>,
    pub route: Vec<Vec2>,
    pub dt: f64,
    pub horizon_steps: usize,
    pub attack_start: usize,
}

impl Scenario {
    /// Default attack start: 20% into the horizon, at least step 1.
    pub fn default_attack_start(horizon_steps: usize) -> usize {
        (horizon_steps / 5).max(1)
    }

    pub fn route_polyline(&self) -> Polyline {
        Polyline::new(self.route.clone())
    }

    pub fn background_track(&self, vehicle_id: u32) -> Option<&Track> {
        self.background.iter().find(|t| t.vehicle_id == vehicle_id)
    }

    pub fn background_ids(&self) -> Vec<u32> {
        self.background.iter().map(|t| t.vehicle_id).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.check().map_err(ScenarioError::Validation)
    }

    fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("id is empty".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(format!("dt {} must be positive", self.dt));
        }
        if !(0 < self.attack_start && self.attack_start < self.horizon_steps) {
            return Err(format!(
                "attack_start {} must satisfy 0 < attack_start < horizon_steps ({})",
                self.attack_start, self.horizon_steps
            ));
        }
        self.road.validate()?;
        if self.route.len() < 2 {
            return Err("route needs at least 2 waypoints".into());
        }
        if self.route.iter().any(|p| !p.is_finite()) {
            return Err("route has non-finite waypoint".into());
        }
        for track in std::iter::once(&self.ego).chain(&self.background) {
            if track.samples.len() != self.horizon_steps {
                return Err(format!(
                    "track {} has {} samples, expected horizon_steps = {}",
                    track.vehicle_id,
                    track.samples.len(),
                    self.horizon_steps
                ));
            }
            track.validate(self.dt)?;
        }
        if !self.road.drivable_area.contains(self.ego.samples[0].position) {
            return Err("ego starts outside drivable_area".into());
        }
        let mut ids = BTreeSet::new();
        for t in &self.background {
            if t.vehicle_id == self.ego.vehicle_id {
                return Err(format!("background vehicle_id {} equals ego id", t.vehicle_id));
            }
            if !ids.insert(t.vehicle_id) {
                return Err(format!("duplicate background vehicle_id {}", t.vehicle_id));
            }
        }
        Ok(())
    }

    /// Translates then rotates the whole scenario about the origin.
    pub fn transformed(&self, rotation: f64, translation: Vec2) -> Scenario {
        let map_p = |p: Vec2| (p + translation).rotated(rotation);
        let map_track = |t: &Track| Track {
            vehicle_id: t.vehicle_id,
            dims: t.dims,
            samples: t
                .samples
                .iter()
                .map(|s| VehicleState {
                    position: map_p(s.position),
                    heading: crate::geometry::normalize_angle(s.heading + rotation),
                    speed: s.speed,
                    accel: s.accel,
                })
                .collect(),
        };
        Scenario {
            id: self.id.clone(),
            road: RoadGeometry {
                lane_centerlines: self
                    .road
                    .lane_centerlines
                    .iter()
                    .map(|l| l.iter().copied().map(map_p).collect())
                    .collect(),
                drivable_area: Polygon::new(
                    self.road.drivable_area.vertices.iter().copied().map(map_p).collect(),
                ),
                template: self.road.template,
            },
            ego: map_track(&self.ego),
            background: self.background.iter().map(map_track).collect(),
            route: self.route.iter().copied().map(map_p).collect(),
            dt: self.dt,
            horizon_steps: self.horizon_steps,
            attack_start: self.attack_start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Split::Train, Split::Test].into_iter().find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub split: Split,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>, split: Split) -> Result<Self, ScenarioError> {
        if scenarios.is_empty() {
            return Err(ScenarioError::Validation("scenario set is empty".into()));
        }
        let mut ids = BTreeSet::new();
        for s in &scenarios {
            if !ids.insert(s.id.as_str()) {
                return Err(ScenarioError::Validation(format!("duplicate scenario id {}", s.id)));
            }
        }
        Ok(Self { scenarios, split })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Free-function form of [`Track::state_at`].
pub fn state_at(track: &Track, step: usize) -> Result<VehicleState, ScenarioError> {
    track.state_at(step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_track(v: f64, n: usize, dt: f64) -> Track {
        let samples = (0..n)
            .map(|k| VehicleState::new(Vec2::new(1.0 + k as f64 * dt * v, 2.0), 0.0, v, 0.0))
            .collect();
        Track::new(1, samples, Dims::default())
    }

    #[test]
    fn state_at_bounds() {
        let t = linear_track(10.0, 5, 0.1);
        assert_eq!(t.state_at(0).unwrap(), t.samples[0]);
        assert!(matches!(
            t.state_at(5),
            Err(ScenarioError::Index { step: 5, len: 5 })
        ));
    }

    #[test]
    fn linear_track_closed_form() {
        let (v, dt) = (7.5, 0.1);
        let t = linear_track(v, 30, dt);
        for k in 0..30 {
            let s = state_at(&t, k).unwrap();
            assert!((s.position.x - (1.0 + k as f64 * dt * v)).abs() < 1e-12);
        }
        assert!(t.validate(dt).is_ok());
    }

    #[test]
    fn teleporting_track_is_rejected() {
        let mut t = linear_track(5.0, 4, 0.1);
        t.samples[2].position.x += 10.0;
        assert!(t.validate(0.1).unwrap_err().contains("moved"));
    }

    #[test]
    fn template_names_round_trip() {
        for t in RoadTemplate::ALL {
            assert_eq!(RoadTemplate::parse(t.as_str()), Some(t));
        }
        assert_eq!(RoadTemplate::parse("roundabout"), None);
    }
}
