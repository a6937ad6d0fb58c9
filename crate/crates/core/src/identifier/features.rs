use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Vec2};
use crate::scenario::Scenario;

pub const TTC_CAP: f64 = 99.0;
const TTC_FLOOR: f64 = 0.01;
pub const CLOSING_THRESHOLD: f64 = 0.1;
pub const PATH_CROSS_RADIUS: f64 = 2.0;

/// Feature names understood by the scoring language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Dist,
    MinDist,
    RelSpeed,
    ClosingSpeed,
    Ttc,
    HeadingAlign,
    LateralOffset,
    Ahead,
    Speed,
    PathCross,
}

impl Feature {
    pub const ALL: [Feature; 10] = [
        Feature::Dist,
        Feature::MinDist,
        Feature::RelSpeed,
        Feature::ClosingSpeed,
        Feature::Ttc,
        Feature::HeadingAlign,
        Feature::LateralOffset,
        Feature::Ahead,
        Feature::Speed,
        Feature::PathCross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Dist => "dist",
            Feature::MinDist => "min_dist",
            Feature::RelSpeed => "rel_speed",
            Feature::ClosingSpeed => "closing_speed",
            Feature::Ttc => "ttc",
            Feature::HeadingAlign => "heading_align",
            Feature::LateralOffset => "lateral_offset",
            Feature::Ahead => "ahead",
            Feature::Speed => "speed",
            Feature::PathCross => "path_cross",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Interaction features of one background vehicle relative to the ego at the
/// attack start step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dist: f64,
    pub min_dist: f64,
    pub rel_speed: f64,
    /// Positive when approaching.
    pub closing_speed: f64,
    pub ttc: f64,
    pub heading_align: f64,
    /// Ego frame, positive left.
    pub lateral_offset: f64,
    /// Ego frame, positive forward.
    pub ahead: f64,
    pub speed: f64,
    pub path_cross: f64,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Dist => self.dist,
            Feature::MinDist => self.min_dist,
            Feature::RelSpeed => self.rel_speed,
            Feature::ClosingSpeed => self.closing_speed,
            Feature::Ttc => self.ttc,
            Feature::HeadingAlign => self.heading_align,
            Feature::LateralOffset => self.lateral_offset,
            Feature::Ahead => self.ahead,
            Feature::Speed => self.speed,
            Feature::PathCross => self.path_cross,
        }
    }

    pub fn is_valid(&self) -> bool {
        Feature::ALL.iter().all(|f| self.get(*f).is_finite())
            && self.ttc > 0.0
            && self.ttc <= TTC_CAP
            && (-1.0..=1.0).contains(&self.heading_align)
    }
}

/// Time to collision from distance and closing speed, capped when not approaching.
pub fn ttc(dist: f64, closing_speed: f64) -> f64 {
    if closing_speed > CLOSING_THRESHOLD {
        (dist / closing_speed).clamp(TTC_FLOOR, TTC_CAP)
    } else {
        TTC_CAP
    }
}

/// Features of every background vehicle at `scenario.attack_start`, using the
/// history up to and including that step.
pub fn extract_features(scenario: &Scenario) -> BTreeMap<u32, FeatureVector> {
    let t = scenario.attack_start.min(scenario.horizon_steps - 1);
    let ego = scenario.ego.samples[t];
    let route = scenario.route_polyline();
    let remaining = (scenario.horizon_steps - 1 - t) as f64 * scenario.dt;
    let forward = Vec2::from_angle(ego.heading);
    let left = forward.perp();

    scenario
        .background
        .iter()
        .map(|track| {
            let bg = track.samples[t];
            let rel_pos = bg.position - ego.position;
            let rel_vel = bg.velocity() - ego.velocity();
            let dist = rel_pos.norm();
            let min_dist = (0..=t)
                .map(|k| track.samples[k].position.distance(scenario.ego.samples[k].position))
                .fold(f64::INFINITY, f64::min);
            let closing_speed = if dist > 1e-9 { -rel_pos.dot(rel_vel) / dist } else { 0.0 };
            let heading_align = if dist > 1e-9 {
                normalize_angle(bg.heading - (-rel_pos).angle()).cos().clamp(-1.0, 1.0)
            } else {
                1.0
            };
            let vel = bg.velocity();
            let steps = (remaining / scenario.dt).round() as usize;
            let crosses = (0..=steps).any(|k| {
                let p = bg.position + vel * (k as f64 * scenario.dt);
                route.distance_to(p) <= PATH_CROSS_RADIUS
            });
            let fv = FeatureVector {
                dist,
                min_dist,
                rel_speed: rel_vel.norm(),
                closing_speed,
                ttc: ttc(dist, closing_speed),
                heading_align,
                lateral_offset: rel_pos.dot(left),
                ahead: rel_pos.dot(forward),
                speed: bg.speed,
                path_cross: if crosses { 1.0 } else { 0.0 },
            };
            (track.vehicle_id, fv)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(Feature::from_name(f.name()), Some(f));
        }
        assert_eq!(Feature::from_name("speeed"), None);
    }

    #[test]
    fn ttc_rule() {
        assert_eq!(ttc(30.0, 10.0), 3.0);
        assert_eq!(ttc(30.0, 0.05), TTC_CAP);
        assert_eq!(ttc(30.0, -4.0), TTC_CAP);
        assert_eq!(ttc(1e6, 0.2), TTC_CAP);
    }
}
