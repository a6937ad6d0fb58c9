//! Synthetic scenario corpus.
//!
//! Each scenario places an ego vehicle and 3–12 background vehicles on one of
//! four road templates. All vehicles are simulated jointly with the bicycle
//! model: pure-pursuit steering along their lane path and IDM gap keeping
//! behind whatever vehicle sits in the lane ahead. Vehicles involved in any
//! contact are removed and the rest re-simulated until the logged traffic is
//! collision-free, so every normal scenario replays without a crash.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ScenarioError;
use crate::geometry::{quantize, quantize_heading, Obb, Polygon, Polyline, Vec2};
use crate::scenario::{
    Dims, RoadGeometry, RoadTemplate, Scenario, ScenarioSet, Split, Track, VehicleState, DEFAULT_DT,
};
use crate::sim::{rollout, step_bicycle, AgentAction, ReplayAgent, SimConfig};

/// Relative template frequencies. Negative or all-zero weights are rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateWeights(pub [f64; 4]);

impl TemplateWeights {
    pub fn uniform() -> Self {
        Self([1.0; 4])
    }

    pub fn only(template: RoadTemplate) -> Self {
        let mut w = [0.0; 4];
        w[template_index(template)] = 1.0;
        Self(w)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScenarioError::Config("template weights must be finite and non-negative".into()));
        }
        if self.0.iter().all(|w| *w == 0.0) {
            return Err(ScenarioError::Config("template weights are all zero".into()));
        }
        Ok(())
    }

    /// Largest-remainder allocation of `n` scenarios; ties go to the earlier template.
    pub fn allocate(&self, n: usize) -> [usize; 4] {
        let total: f64 = self.0.iter().sum();
        let exact: Vec<f64> = self.0.iter().map(|w| w / total * n as f64).collect();
        let mut counts = [0usize; 4];
        for i in 0..4 {
            counts[i] = exact[i].floor() as usize;
        }
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for i in order {
            if left == 0 {
                break;
            }
            if self.0[i] > 0.0 {
                counts[i] += 1;
                left -= 1;
            }
        }
        counts
    }
}

fn template_index(t: RoadTemplate) -> usize {
    RoadTemplate::ALL.iter().position(|x| *x == t).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    pub min_background: usize,
    pub max_background: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 90,
            dt: DEFAULT_DT,
            min_background: 3,
            max_background: 12,
        }
    }
}

/// `n` scenarios from `seed` with the default configuration, tagged as the
/// training split.
pub fn generate_corpus(seed: u64, n: usize, weights: &TemplateWeights) -> Result<ScenarioSet, ScenarioError> {
    generate_corpus_with(seed, n, weights, &CorpusConfig::default(), Split::Train)
}

pub fn generate_corpus_with(
    seed: u64,
    n: usize,
    weights: &TemplateWeights,
    cfg: &CorpusConfig,
    split: Split,
) -> Result<ScenarioSet, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::Config("corpus size must be at least 1".into()));
    }
    weights.validate()?;
    if cfg.horizon_steps < 10 || cfg.min_background == 0 || cfg.min_background > cfg.max_background {
        return Err(ScenarioError::Config("invalid corpus configuration".into()));
    }
    let counts = weights.allocate(n);
    let mut templates: Vec<RoadTemplate> = RoadTemplate::ALL
        .iter()
        .zip(counts)
        .flat_map(|(t, c)| std::iter::repeat_n(*t, c))
        .collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..templates.len()).rev() {
        let j = order_rng.random_range(0..=i);
        templates.swap(i, j);
    }
    let scenarios = templates
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let id = format!("{}-s{seed}-{i:04}", t.as_str());
            generate_scenario(&id, *t, cfg, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ScenarioSet::new(scenarios, split)
}

const LANE_WIDTH: f64 = 3.5;
const ARM_LENGTH: f64 = 70.0;
const CHAMFER: f64 = 8.0;
const LANE_END: f64 = 69.0;

/// Lane path through the road with the arc-length window where vehicles may spawn.
#[derive(Debug, Clone)]
struct LanePath {
    line: Polyline,
    spawn: (f64, f64),
    /// Window for the ego start, if this path can carry the ego.
    ego_spawn: Option<(f64, f64)>,
    speed_limit: Vec<f64>,
}

impl LanePath {
    fn new(points: Vec<Vec2>, spawn: (f64, f64), ego_spawn: Option<(f64, f64)>) -> Self {
        let line = Polyline::new(points);
        let speed_limit = curvature_speed_limit(&line);
        Self {
            line,
            spawn,
            ego_spawn,
            speed_limit,
        }
    }

    /// Curvature-limited speed over the next 25 m of the path.
    fn limit_ahead(&self, s: f64) -> f64 {
        let i0 = s.max(0.0) as usize;
        let i1 = (i0 + 25).min(self.speed_limit.len().saturating_sub(1));
        self.speed_limit
            .get(i0.min(i1)..=i1)
            .map(|w| w.iter().copied().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::INFINITY)
    }
}

/// Speed limit per meter of arc length from a lateral acceleration budget of 2.5 m/s².
fn curvature_speed_limit(line: &Polyline) -> Vec<f64> {
    let n = line.length().ceil() as usize + 1;
    (0..n)
        .map(|i| {
            let s = i as f64;
            let (_, h0) = line.sample((s - 2.0).max(0.0));
            let (_, h1) = line.sample(s + 2.0);
            let dh = crate::geometry::normalize_angle(h1 - h0).abs();
            let kappa = dh / 4.0;
            if kappa < 1e-6 {
                f64::INFINITY
            } else {
                (2.5 / kappa).sqrt()
            }
        })
        .collect()
}

struct Layout {
    area: Polygon,
    paths: Vec<LanePath>,
}

fn straight_points(a: Vec2, b: Vec2, spacing: f64) -> Vec<Vec2> {
    let n = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

fn bezier(p0: Vec2, c: Vec2, p2: Vec2, n: usize) -> Vec<Vec2> {
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            p0 * ((1.0 - t) * (1.0 - t)) + c * (2.0 * (1.0 - t) * t) + p2 * (t * t)
        })
        .collect()
}

fn append(path: &mut Vec<Vec2>, more: Vec<Vec2>) {
    for p in more {
        if path.last().is_none_or(|q| q.distance(p) > 1e-9) {
            path.push(p);
        }
    }
}

fn straight_layout() -> Layout {
    let len = 220.0;
    let area = Polygon::new(vec![
        Vec2::new(0.0, -2.0 * LANE_WIDTH),
        Vec2::new(len, -2.0 * LANE_WIDTH),
        Vec2::new(len, 2.0 * LANE_WIDTH),
        Vec2::new(0.0, 2.0 * LANE_WIDTH),
    ]);
    let mut paths = Vec::new();
    for k in [0.5, 1.5] {
        let y = -k * LANE_WIDTH;
        let line = straight_points(Vec2::new(1.0, y), Vec2::new(len - 1.0, y), 2.0);
        paths.push(LanePath::new(line, (4.0, 150.0), Some((10.0, 45.0))));
    }
    for k in [0.5, 1.5] {
        let y = k * LANE_WIDTH;
        let line = straight_points(Vec2::new(len - 1.0, y), Vec2::new(1.0, y), 2.0);
        paths.push(LanePath::new(line, (40.0, 200.0), None));
    }
    Layout { area, paths }
}

fn ramp_layout() -> Layout {
    let len = 220.0;
    let bottom = -2.0 * LANE_WIDTH;
    let merge_y = -1.5 * LANE_WIDTH;
    let a = Vec2::new(15.0, -38.0);
    let b = Vec2::new(85.0, merge_y);
    let u = (b - a).normalized();
    let n = u.perp();
    let half = 2.5;
    let cross_x = |p: Vec2| p.x + (bottom - p.y) / u.y * u.x;
    let left_start = a + n * half;
    let right_start = a - n * half;
    let area = Polygon::new(vec![
        Vec2::new(0.0, bottom),
        Vec2::new(cross_x(left_start), bottom),
        left_start,
        right_start,
        Vec2::new(cross_x(right_start), bottom),
        Vec2::new(len, bottom),
        Vec2::new(len, 0.0),
        Vec2::new(0.0, 0.0),
    ]);
    let mut paths = Vec::new();
    for k in [0.5, 1.5] {
        let y = -k * LANE_WIDTH;
        let line = straight_points(Vec2::new(1.0, y), Vec2::new(len - 1.0, y), 2.0);
        paths.push(LanePath::new(line, (4.0, 150.0), Some((10.0, 50.0))));
    }
    let curve_start = b - u * 15.0;
    let mut ramp = straight_points(a + u * 1.0, curve_start, 2.0);
    append(&mut ramp, bezier(curve_start, b, Vec2::new(b.x + 15.0, merge_y), 16));
    append(&mut ramp, straight_points(Vec2::new(b.x + 15.0, merge_y), Vec2::new(len - 1.0, merge_y), 2.0));
    paths.push(LanePath::new(ramp, (2.0, 60.0), Some((10.0, 40.0))));
    Layout { area, paths }
}

/// Plus- or T-shaped junction centered at the origin; arms are outward unit
/// directions listed counter-clockwise.
fn junction_layout(arms: &[f64]) -> Layout {
    let hw = LANE_WIDTH;
    let e = hw + CHAMFER;
    let mut vertices = Vec::new();
    for (i, &ang) in arms.iter().enumerate() {
        let d = Vec2::from_angle(ang);
        let n = d.perp();
        vertices.push(d * ARM_LENGTH - n * hw);
        vertices.push(d * ARM_LENGTH + n * hw);
        let next = arms[(i + 1) % arms.len()];
        let gap = crate::geometry::normalize_angle(next - ang).rem_euclid(2.0 * PI);
        if (gap - PI / 2.0).abs() < 1e-6 {
            let db = Vec2::from_angle(next);
            vertices.push(d * e + n * hw);
            vertices.push(db * e - db.perp() * hw);
        }
    }
    let area = Polygon::new(vertices);

    let half_lane = 0.5 * LANE_WIDTH;
    let mut paths = Vec::new();
    for &from in arms {
        let d_in = Vec2::from_angle(from);
        let travel_in = -d_in;
        let right_in = Vec2::new(travel_in.y, -travel_in.x);
        let in_start = d_in * LANE_END + right_in * half_lane;
        let in_stop = d_in * e + right_in * half_lane;
        for &to in arms {
            if to == from {
                continue;
            }
            let d_out = Vec2::from_angle(to);
            let right_out = Vec2::new(d_out.y, -d_out.x);
            let out_start = d_out * e + right_out * half_lane;
            let out_end = d_out * LANE_END + right_out * half_lane;
            let denom = travel_in.cross(d_out);
            let ctrl = if denom.abs() < 1e-9 {
                (in_stop + out_start) * 0.5
            } else {
                let t = (out_start - in_stop).cross(d_out) / denom;
                in_stop + travel_in * t
            };
            let mut pts = straight_points(in_start, in_stop, 2.0);
            append(&mut pts, bezier(in_stop, ctrl, out_start, 16));
            append(&mut pts, straight_points(out_start, out_end, 2.0));
            let inbound = LANE_END - e;
            paths.push(LanePath::new(
                pts,
                (2.0, inbound - 4.0),
                Some((inbound - 50.0, inbound - 18.0)),
            ));
        }
    }
    Layout { area, paths }
}

fn layout_for(t: RoadTemplate) -> Layout {
    match t {
        RoadTemplate::Straight => straight_layout(),
        RoadTemplate::Ramp => ramp_layout(),
        RoadTemplate::TIntersection => junction_layout(&[0.0, PI, -PI / 2.0 + 2.0 * PI]),
        RoadTemplate::Intersection => junction_layout(&[0.0, PI / 2.0, PI, 3.0 * PI / 2.0]),
    }
}

#[derive(Debug, Clone)]
struct Spawn {
    id: u32,
    path: usize,
    s0: f64,
    v0: f64,
    v_desired: f64,
}

struct Idm {
    a: f64,
    b: f64,
    headway: f64,
    min_gap: f64,
}

const IDM: Idm = Idm {
    a: 1.5,
    b: 2.0,
    headway: 1.2,
    min_gap: 2.5,
};

impl Idm {
    fn accel(&self, v: f64, v0: f64, gap: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (v / v0.max(0.1)).powi(4);
        match gap {
            None => self.a * free,
            Some((s, dv)) => {
                let s_star = self.min_gap + (v * self.headway + v * dv / (2.0 * (self.a * self.b).sqrt())).max(0.0);
                self.a * (free - (s_star / s.max(0.1)).powi(2))
            }
        }
    }
}

/// Jointly simulates all spawns; returns one sample list per spawn.
fn simulate(spawns: &[Spawn], paths: &[LanePath], cfg: &CorpusConfig, sim: &SimConfig) -> Vec<Vec<VehicleState>> {
    let dims = Dims::default();
    let mut states: Vec<VehicleState> = spawns
        .iter()
        .map(|sp| {
            let (p, h) = paths[sp.path].line.sample(sp.s0);
            VehicleState::new(p, h, sp.v0, 0.0)
        })
        .collect();
    let mut out: Vec<Vec<VehicleState>> = states.iter().map(|s| vec![*s]).collect();
    for _ in 1..cfg.horizon_steps {
        let snapshot = states.clone();
        for (i, sp) in spawns.iter().enumerate() {
            let me = snapshot[i];
            let path = &paths[sp.path];
            let s_here = path.line.project(me.position).s;
            let f = Vec2::from_angle(me.heading);
            let n = f.perp();
            let mut lead: Option<(f64, f64)> = None;
            for (j, other) in snapshot.iter().enumerate() {
                if j == i {
                    continue;
                }
                let rel = other.position - me.position;
                let lon = rel.dot(f);
                let lat = rel.dot(n);
                if lon > 0.0 && lat.abs() < 2.2 && lon < 80.0 {
                    let gap = lon - dims.length;
                    let dv = me.speed - other.speed * (other.heading - me.heading).cos();
                    if lead.is_none_or(|(g, _)| gap < g) {
                        lead = Some((gap, dv));
                    }
                }
            }
            let v_target = sp.v_desired.min(path.limit_ahead(s_here));
            let accel = IDM.accel(me.speed, v_target, lead);
            let lookahead = (0.9 * me.speed + 3.0).clamp(4.0, 15.0);
            let (target, _) = path.line.sample(s_here + lookahead);
            let alpha = crate::geometry::normalize_angle((target - me.position).angle() - me.heading);
            let delta = (2.0 * sim.wheelbase * alpha.sin() / lookahead).atan();
            let action = AgentAction::new(delta / sim.max_steer_angle, sim.cmd_of(accel));
            states[i] = step_bicycle(&me, action, sim, cfg.dt);
            out[i].push(states[i]);
        }
    }
    out
}

fn quantized(samples: &[VehicleState]) -> Vec<VehicleState> {
    samples
        .iter()
        .map(|s| VehicleState {
            position: Vec2::new(quantize(s.position.x), quantize(s.position.y)),
            heading: quantize_heading(s.heading),
            speed: quantize(s.speed.max(0.0)),
            accel: quantize(s.accel),
        })
        .collect()
}

/// Contact test with a safety margin around both boxes.
fn near_contact(a: &VehicleState, b: &VehicleState) -> bool {
    let d = Dims::default();
    let margin = 0.3;
    let fa = Obb::new(a.position, a.heading, d.length + margin, d.width + margin);
    let fb = Obb::new(b.position, b.heading, d.length + margin, d.width + margin);
    fa.overlaps(&fb)
}

fn generate_scenario(
    id: &str,
    template: RoadTemplate,
    cfg: &CorpusConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Scenario, ScenarioError> {
    let layout = layout_for(template);
    let sim = SimConfig::default();
    let horizon_time = cfg.horizon_steps as f64 * cfg.dt;

    for _attempt in 0..200 {
        let ego_paths: Vec<usize> = (0..layout.paths.len())
            .filter(|&i| layout.paths[i].ego_spawn.is_some())
            .collect();
        let ego_path = ego_paths[rng.random_range(0..ego_paths.len())];
        let (lo, hi) = layout.paths[ego_path].ego_spawn.unwrap();
        let ego_v_des = rng.random_range(9.0..13.0);
        let mut spawns = vec![Spawn {
            id: 0,
            path: ego_path,
            s0: rng.random_range(lo..hi),
            v0: rng.random_range(7.0..11.0),
            v_desired: ego_v_des,
        }];
        let target = rng.random_range(cfg.min_background..=cfg.max_background);
        let mut next_id = 1u32;
        let mut tries = 0;
        while spawns.len() < target + 1 + 6 && tries < 400 {
            tries += 1;
            let path = rng.random_range(0..layout.paths.len());
            let lp = &layout.paths[path];
            let s0 = rng.random_range(lp.spawn.0..lp.spawn.1);
            let v_des = rng.random_range(7.0..14.0);
            if s0 + v_des * horizon_time + 6.0 > lp.line.length() {
                continue;
            }
            let (p, _) = lp.line.sample(s0);
            let crowded = spawns.iter().any(|sp| {
                let (q, _) = layout.paths[sp.path].line.sample(sp.s0);
                p.distance(q) < 10.0
            });
            if crowded {
                continue;
            }
            spawns.push(Spawn {
                id: next_id,
                path,
                s0,
                v0: rng.random_range(0.6..1.0) * v_des,
                v_desired: v_des,
            });
            next_id += 1;
        }

        let ego_s0 = spawns[0].s0;
        let ego_len = layout.paths[ego_path].line.length();
        if ego_s0 + ego_v_des * horizon_time + 6.0 > ego_len {
            continue;
        }

        // Drop vehicles until the logged traffic is contact-free.
        let tracks = loop {
            let sim_tracks: Vec<Vec<VehicleState>> = simulate(&spawns, &layout.paths, cfg, &sim)
                .iter()
                .map(|t| quantized(t))
                .collect();
            let mut offender = None;
            'outer: for i in (1..spawns.len()).rev() {
                if sim_tracks[i].iter().any(|s| !layout.area.contains(s.position)) {
                    offender = Some(i);
                    break;
                }
                for j in 0..i {
                    if sim_tracks[i]
                        .iter()
                        .zip(&sim_tracks[j])
                        .any(|(a, b)| near_contact(a, b))
                    {
                        offender = Some(i);
                        break 'outer;
                    }
                }
            }
            match offender {
                Some(i) => {
                    spawns.remove(i);
                }
                None if spawns.len() > cfg.max_background + 1 => {
                    spawns.pop();
                }
                None => break sim_tracks,
            }
        };
        if spawns.len() < cfg.min_background + 1 {
            continue;
        }
        let ego_samples = &tracks[0];
        if ego_samples.iter().any(|s| !layout.area.contains(s.position)) {
            continue;
        }

        let ego_line = &layout.paths[ego_path].line;
        let s_start = ego_line.project(ego_samples[0].position).s;
        let s_end = ego_line.project(ego_samples.last().unwrap().position).s;
        if s_end - s_start < 10.0 {
            continue;
        }
        let mut route = vec![ego_line.sample(s_start).0];
        for p in ego_line.points() {
            let s = ego_line.project(*p).s;
            if s > s_start + 0.5 && s < s_end - 0.5 {
                route.push(*p);
            }
        }
        route.push(ego_line.sample(s_end).0);
        let route: Vec<Vec2> = route
            .into_iter()
            .map(|p| Vec2::new(quantize(p.x), quantize(p.y)))
            .collect();

        let q = |p: &Vec2| Vec2::new(quantize(p.x), quantize(p.y));
        let road = RoadGeometry {
            lane_centerlines: layout
                .paths
                .iter()
                .map(|lp| lp.line.points().iter().map(q).collect())
                .collect(),
            drivable_area: Polygon::new(layout.area.vertices.iter().map(q).collect()),
            template,
        };
        let scenario = Scenario {
            id: id.to_string(),
            road,
            ego: Track::new(0, ego_samples.clone(), Dims::default()),
            background: spawns
                .iter()
                .zip(&tracks)
                .skip(1)
                .map(|(sp, t)| Track::new(sp.id, t.clone(), Dims::default()))
                .collect(),
            route,
            dt: cfg.dt,
            horizon_steps: cfg.horizon_steps,
            attack_start: Scenario::default_attack_start(cfg.horizon_steps),
        };
        scenario.validate()?;
        let replay = rollout(&scenario, &mut ReplayAgent::new(), None)
            .expect("no overrides in a normal replay");
        assert!(
            !replay.collided,
            "generated scenario {id} collides under log replay"
        );
        return Ok(scenario);
    }
    Err(ScenarioError::Config(format!(
        "could not generate a valid {template} scenario for {id}"
    )))
}
