use adversim_core::corpus::{generate_corpus, TemplateWeights};
use adversim_core::geometry::Vec2;
use adversim_core::io::{load_scenario, load_set, save_scenario, save_set, scenario_from_json, scenario_to_json};
use adversim_core::sim::{rollout, ReplayAgent};
use adversim_core::{RoadTemplate, ScenarioError};

#[test]
fn save_load_round_trip_100() {
    let set = generate_corpus(3, 100, &TemplateWeights::uniform()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, s) in set.scenarios.iter().enumerate() {
        // Mix in rigid transforms so coordinates are not only generator output.
        let s = if i % 2 == 0 { s.clone() } else { s.transformed(0.1 * i as f64, Vec2::new(3.0, -7.0)) };
        let s = scenario_from_json(&scenario_to_json(&s)).unwrap();
        let path = dir.path().join(format!("{i}.json"));
        save_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }
    let out = dir.path().join("set");
    save_set(&set, &out).unwrap();
    assert_eq!(load_set(&out).unwrap(), set);
}

#[test]
fn attack_start_violation_is_reported() {
    let set = generate_corpus(3, 1, &TemplateWeights::uniform()).unwrap();
    let mut s = set.scenarios[0].clone();
    s.attack_start = s.horizon_steps;
    let err = scenario_from_json(&scenario_to_json(&s)).unwrap_err();
    assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("attack_start")), "{err}");
}

#[test]
fn corpus_is_byte_reproducible() {
    let a = generate_corpus(9, 8, &TemplateWeights::uniform()).unwrap();
    let b = generate_corpus(9, 8, &TemplateWeights::uniform()).unwrap();
    for (x, y) in a.scenarios.iter().zip(&b.scenarios) {
        assert_eq!(scenario_to_json(x), scenario_to_json(y));
    }
    let c = generate_corpus(10, 8, &TemplateWeights::uniform()).unwrap();
    assert_ne!(scenario_to_json(&a.scenarios[0]), scenario_to_json(&c.scenarios[0]));
}

#[test]
fn every_template_replays_without_collision() {
    for t in RoadTemplate::ALL {
        let set = generate_corpus(21, 10, &TemplateWeights::only(t)).unwrap();
        for s in &set.scenarios {
            assert_eq!(s.road.template, t);
            assert!((3..=12).contains(&s.background.len()));
            let r = rollout(s, &mut ReplayAgent::new(), None).unwrap();
            assert!(!r.collided && !r.offroad, "{}", s.id);
            assert!(r.route_completion > 0.9, "{}: {}", s.id, r.route_completion);
        }
    }
}
