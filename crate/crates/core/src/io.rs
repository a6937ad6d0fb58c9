//! Scenario file format and canonical JSON output.
//!
//! Saved files are byte-stable: object keys are sorted and every float is
//! written with exactly six decimals.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::error::ScenarioError;
use crate::geometry::{Polygon, Vec2};
use crate::scenario::{
    Dims, RoadGeometry, RoadTemplate, Scenario, ScenarioSet, Split, Track, VehicleState,
};

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    id: String,
    dt: f64,
    horizon_steps: usize,
    attack_start: usize,
    road: RoadFile,
    route: Vec<[f64; 2]>,
    ego: TrackFile,
    background: Vec<TrackFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RoadFile {
    template: String,
    drivable_area: Vec<[f64; 2]>,
    lanes: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackFile {
    vehicle_id: u32,
    length: f64,
    width: f64,
    samples: Vec<[f64; 5]>,
}

fn pt(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

fn arr(p: Vec2) -> [f64; 2] {
    [p.x, p.y]
}

impl From<&Track> for TrackFile {
    fn from(t: &Track) -> Self {
        TrackFile {
            vehicle_id: t.vehicle_id,
            length: t.dims.length,
            width: t.dims.width,
            samples: t
                .samples
                .iter()
                .map(|s| [s.position.x, s.position.y, s.heading, s.speed, s.accel])
                .collect(),
        }
    }
}

impl From<TrackFile> for Track {
    fn from(t: TrackFile) -> Self {
        Track {
            vehicle_id: t.vehicle_id,
            dims: Dims {
                length: t.length,
                width: t.width,
            },
            samples: t
                .samples
                .into_iter()
                .map(|s| VehicleState::new(Vec2::new(s[0], s[1]), s[2], s[3], s[4]))
                .collect(),
        }
    }
}

fn to_file(s: &Scenario) -> ScenarioFile {
    ScenarioFile {
        id: s.id.clone(),
        dt: s.dt,
        horizon_steps: s.horizon_steps,
        attack_start: s.attack_start,
        road: RoadFile {
            template: s.road.template.as_str().to_string(),
            drivable_area: s.road.drivable_area.vertices.iter().copied().map(arr).collect(),
            lanes: s
                .road
                .lane_centerlines
                .iter()
                .map(|l| l.iter().copied().map(arr).collect())
                .collect(),
        },
        route: s.route.iter().copied().map(arr).collect(),
        ego: (&s.ego).into(),
        background: s.background.iter().map(TrackFile::from).collect(),
    }
}

fn from_file(f: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let template = RoadTemplate::parse(&f.road.template)
        .ok_or_else(|| ScenarioError::Schema(format!("unknown road template `{}`", f.road.template)))?;
    Ok(Scenario {
        id: f.id,
        road: RoadGeometry {
            lane_centerlines: f
                .road
                .lanes
                .into_iter()
                .map(|l| l.into_iter().map(pt).collect())
                .collect(),
            drivable_area: Polygon::new(f.road.drivable_area.into_iter().map(pt).collect()),
            template,
        },
        ego: f.ego.into(),
        background: f.background.into_iter().map(Track::from).collect(),
        route: f.route.into_iter().map(pt).collect(),
        dt: f.dt,
        horizon_steps: f.horizon_steps,
        attack_start: f.attack_start,
    })
}

/// Parses and validates a scenario from JSON text.
pub fn scenario_from_json(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    let scenario = from_file(file)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Canonical JSON text of a scenario (sorted keys, six-decimal floats).
pub fn scenario_to_json(s: &Scenario) -> String {
    let value = serde_json::to_value(to_file(s)).expect("scenario serializes to a JSON value");
    to_canonical_string(&value)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    scenario_from_json(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, scenario_to_json(s)).map_err(|e| ScenarioError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct SetManifest {
    split: Split,
    scenarios: Vec<String>,
}

/// Writes a set as `<dir>/set.json` plus one `<id>.json` per scenario.
pub fn save_set(set: &ScenarioSet, dir: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    for s in &set.scenarios {
        save_scenario(s, dir.join(format!("{}.json", s.id)))?;
    }
    let manifest = SetManifest {
        split: set.split,
        scenarios: set.scenarios.iter().map(|s| s.id.clone()).collect(),
    };
    let text = to_canonical_string(&serde_json::to_value(manifest).expect("manifest value"));
    let path = dir.join("set.json");
    fs::write(&path, text).map_err(|e| ScenarioError::io(path, e))
}

pub fn load_set(dir: impl AsRef<Path>) -> Result<ScenarioSet, ScenarioError> {
    let dir = dir.as_ref();
    let path = dir.join("set.json");
    let text = fs::read_to_string(&path).map_err(|e| ScenarioError::io(&path, e))?;
    let manifest: SetManifest =
        serde_json::from_str(&text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    let scenarios = manifest
        .scenarios
        .iter()
        .map(|id| load_scenario(dir.join(format!("{id}.json"))))
        .collect::<Result<Vec<_>, _>>()?;
    ScenarioSet::new(scenarios, manifest.split)
}

struct FixedFloat;

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let v = if value == 0.0 { 0.0 } else { value };
        write!(writer, "{v:.6}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes a JSON value with sorted keys and six-decimal floats, newline
/// terminated.
pub fn to_canonical_string(value: &Value) -> String {
    let sorted = sort_keys(value);
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloat);
    sorted.serialize(&mut ser).expect("in-memory write");
    out.push(b'\n');
    String::from_utf8(out).expect("json is utf-8")
}

fn sort_keys(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            let mut out = serde_json::Map::new();
            for (k, v) in entries {
                out.insert(k.clone(), sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_sorts_keys_and_fixes_floats() {
        let v = json!({"b": 1.5, "a": [0.1, 2], "c": {"z": -0.0, "y": true}});
        assert_eq!(
            to_canonical_string(&v),
            "{\"a\":[0.100000,2],\"b\":1.500000,\"c\":{\"y\":true,\"z\":0.000000}}\n"
        );
    }

    #[test]
    fn missing_field_is_schema_error() {
        let err = scenario_from_json("{\"id\": \"x\"}").unwrap_err();
        assert!(matches!(err, ScenarioError::Schema(_)), "{err}");
    }
}
