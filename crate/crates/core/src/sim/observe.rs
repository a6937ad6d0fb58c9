use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, ray_segment_hit, Polyline, Vec2};
use crate::scenario::{Dims, RoadGeometry, VehicleState};

pub const NUM_RAYS: usize = 16;
pub const RAY_RANGE: f64 = 30.0;
/// Arc-length lookahead of the navigation waypoint, meters.
pub const NAV_LOOKAHEAD: f64 = 10.0;

/// Ego-centric observation fed to driving policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ego_speed: f64,
    /// Ego heading minus route tangent, (−π, π].
    pub heading_error: f64,
    /// Signed offset to the route, positive left.
    pub lateral_offset: f64,
    /// Distance to the navigation waypoint.
    pub nav_distance: f64,
    /// Bearing of the navigation waypoint relative to ego heading.
    pub nav_bearing: f64,
    pub rays: [f64; NUM_RAYS],
}

/// Clearance along 16 evenly spaced rays (ray 0 points forward, counter-clockwise
/// order). Each value is the distance from the ego's own box edge to the nearest
/// other vehicle or drivable-area boundary, capped at [`RAY_RANGE`].
pub fn raycast(
    ego: &VehicleState,
    ego_dims: Dims,
    others: &[(VehicleState, Dims)],
    road: &RoadGeometry,
) -> [f64; NUM_RAYS] {
    let origin = ego.position;
    let reach = RAY_RANGE + 0.5 * ego_dims.length.hypot(ego_dims.width);
    let mut segments: Vec<(Vec2, Vec2)> = Vec::new();
    for (s, d) in others {
        let fp = s.footprint(*d);
        if fp.center.distance(origin) - fp.circumradius() > reach {
            continue;
        }
        let c = fp.corners();
        for i in 0..4 {
            segments.push((c[i], c[(i + 1) % 4]));
        }
    }
    for (a, b) in road.drivable_area.edges() {
        if crate::geometry::point_segment_distance(origin, a, b) <= reach {
            segments.push((a, b));
        }
    }

    let hl = 0.5 * ego_dims.length;
    let hw = 0.5 * ego_dims.width;
    let mut rays = [RAY_RANGE; NUM_RAYS];
    for (i, ray) in rays.iter_mut().enumerate() {
        let rel = i as f64 * 2.0 * PI / NUM_RAYS as f64;
        let dir = Vec2::from_angle(ego.heading + rel);
        let (c, s) = (rel.cos().abs(), rel.sin().abs());
        let exit = (if c > 1e-12 { hl / c } else { f64::INFINITY })
            .min(if s > 1e-12 { hw / s } else { f64::INFINITY });
        let hit = segments
            .iter()
            .filter_map(|(a, b)| ray_segment_hit(origin, dir, *a, *b))
            .fold(f64::INFINITY, f64::min);
        if hit.is_finite() {
            *ray = (hit - exit).clamp(0.0, RAY_RANGE);
        }
    }
    rays
}

/// Builds the policy observation for the ego at `ego`.
pub fn observe(
    ego: &VehicleState,
    ego_dims: Dims,
    others: &[(VehicleState, Dims)],
    road: &RoadGeometry,
    route: &Polyline,
) -> Observation {
    let proj = route.project(ego.position);
    let (target, _) = route.sample(proj.s + NAV_LOOKAHEAD);
    let to_target = target - ego.position;
    let nav_distance = to_target.norm();
    let nav_bearing = if nav_distance > 1e-9 {
        normalize_angle(to_target.angle() - ego.heading)
    } else {
        0.0
    };
    Observation {
        ego_speed: ego.speed,
        heading_error: normalize_angle(ego.heading - proj.heading),
        lateral_offset: proj.lateral,
        nav_distance,
        nav_bearing,
        rays: raycast(ego, ego_dims, others, road),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::scenario::RoadTemplate;

    fn big_road() -> RoadGeometry {
        RoadGeometry {
            lane_centerlines: vec![],
            drivable_area: Polygon::new(vec![
                Vec2::new(-200.0, -200.0),
                Vec2::new(200.0, -200.0),
                Vec2::new(200.0, 200.0),
                Vec2::new(-200.0, 200.0),
            ]),
            template: RoadTemplate::Straight,
        }
    }

    #[test]
    fn empty_scene_all_max() {
        let ego = VehicleState::new(Vec2::ZERO, 0.3, 5.0, 0.0);
        let rays = raycast(&ego, Dims::default(), &[], &big_road());
        assert!(rays.iter().all(|r| *r == RAY_RANGE));
    }

    #[test]
    fn vehicle_dead_ahead() {
        let ego = VehicleState::new(Vec2::ZERO, 0.0, 5.0, 0.0);
        let other = VehicleState::new(Vec2::new(12.0, 0.0), 0.0, 0.0, 0.0);
        let rays = raycast(&ego, Dims::default(), &[(other, Dims::default())], &big_road());
        assert!((rays[0] - 7.5).abs() < 1e-9, "{}", rays[0]);
        assert_eq!(rays[8], RAY_RANGE);
    }

    #[test]
    fn boundary_distance_when_close() {
        let road = RoadGeometry {
            lane_centerlines: vec![],
            drivable_area: Polygon::new(vec![
                Vec2::new(-100.0, -5.0),
                Vec2::new(100.0, -5.0),
                Vec2::new(100.0, 5.0),
                Vec2::new(-100.0, 5.0),
            ]),
            template: RoadTemplate::Straight,
        };
        let ego = VehicleState::new(Vec2::ZERO, 0.0, 5.0, 0.0);
        let rays = raycast(&ego, Dims::default(), &[], &road);
        // Left ray: boundary at 5 m, half width 1 m.
        assert!((rays[4] - 4.0).abs() < 1e-9);
        assert!((rays[12] - 4.0).abs() < 1e-9);
        assert_eq!(rays[0], RAY_RANGE);
    }

    #[test]
    fn frame_invariance() {
        let ego = VehicleState::new(Vec2::new(3.0, -2.0), 0.4, 5.0, 0.0);
        let others = vec![
            (VehicleState::new(Vec2::new(15.0, 4.0), 1.0, 0.0, 0.0), Dims::default()),
            (VehicleState::new(Vec2::new(-6.0, -9.0), -2.0, 0.0, 0.0), Dims { length: 6.0, width: 2.5 }),
        ];
        let road = big_road();
        let base = raycast(&ego, Dims::default(), &others, &road);
        let theta = 1.234;
        let rot = |s: &VehicleState| VehicleState {
            position: s.position.rotated(theta),
            heading: normalize_angle(s.heading + theta),
            ..*s
        };
        let road_r = RoadGeometry {
            drivable_area: Polygon::new(road.drivable_area.vertices.iter().map(|p| p.rotated(theta)).collect()),
            ..road.clone()
        };
        let others_r: Vec<_> = others.iter().map(|(s, d)| (rot(s), *d)).collect();
        let turned = raycast(&rot(&ego), Dims::default(), &others_r, &road_r);
        for (a, b) in base.iter().zip(turned.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
