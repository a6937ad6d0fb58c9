use adversim_core::adversary::{
    argmax_factorized, collision_likelihood, ego_predict, generate_candidates, plan_attack, select_adversarial, Candidate,
    CandidateSet, EgoBuffer, EgoSource,
};
use adversim_core::corpus::{generate_corpus, TemplateWeights};
use adversim_core::geometry::Vec2;
use adversim_core::plan::{AdversarialPlan, PlannedTrajectory};
use adversim_core::scenario::{Dims, VehicleState};
use adversim_core::sim::{rollout, ReplayAgent, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus() -> adversim_core::ScenarioSet {
    generate_corpus(5, 12, &TemplateWeights::uniform()).unwrap()
}

#[test]
fn candidate_library_properties() {
    let set = corpus();
    let cfg = SimConfig::default();
    for s in &set.scenarios {
        for id in s.background_ids().into_iter().take(3) {
            let c = generate_candidates(s, id, s.attack_start).unwrap();
            assert_eq!(c.candidates.len(), 21);
            let total: f64 = c.candidates.iter().map(|x| x.prior).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(c.candidates.iter().all(|x| x.prior > 0.0));

            let log = &s.background_track(id).unwrap().samples[s.attack_start..];
            let maintain = c
                .candidates
                .iter()
                .find(|x| x.maneuver == "maintain" && x.speed_scale == 1.0)
                .unwrap();
            let rms = (maintain
                .trajectory
                .states
                .iter()
                .zip(log)
                .map(|(a, b)| a.position.distance(b.position).powi(2))
                .sum::<f64>()
                / log.len() as f64)
                .sqrt();
            assert!(rms < 0.1, "{} vehicle {id}: maintain rms {rms}", s.id);
            let best = c.candidates.iter().map(|x| x.prior).fold(0.0, f64::max);
            assert!(maintain.prior >= best - 1e-12, "{} vehicle {id}", s.id);

            for cand in &c.candidates {
                assert_eq!(cand.trajectory.states[0], log[0]);
                assert_eq!(cand.trajectory.states.len(), log.len());
                assert!(cand.trajectory.replay_deviation(&cfg, s.dt) <= 1e-9);
            }
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let set = corpus();
    let s = &set.scenarios[0];
    let id = s.background_ids()[0];
    assert_eq!(
        generate_candidates(s, id, s.attack_start).unwrap(),
        generate_candidates(s, id, s.attack_start).unwrap()
    );
}

fn traj(p: Vec2, h: f64, v: f64, n: usize) -> Vec<VehicleState> {
    let d = Vec2::from_angle(h);
    (0..n).map(|k| VehicleState::new(p + d * (v * 0.1 * k as f64), h, v, 0.0)).collect()
}

fn set_of(id: u32, trajs: Vec<Vec<VehicleState>>, priors: Vec<f64>) -> CandidateSet {
    CandidateSet {
        attacker_id: id,
        dims: Dims::default(),
        start_step: 0,
        candidates: trajs
            .into_iter()
            .zip(priors)
            .enumerate()
            .map(|(i, (t, p))| Candidate {
                maneuver: format!("m{i}"),
                speed_scale: 1.0,
                trajectory: PlannedTrajectory {
                    start_step: 0,
                    maneuver: format!("m{i}"),
                    actions: vec![Default::default(); t.len() - 1],
                    states: t,
                },
                naturalness_cost: 0.0,
                prior: p,
            })
            .collect(),
    }
}

#[test]
fn prior_times_likelihood_decides() {
    let ego = traj(Vec2::ZERO, 0.0, 0.0, 10);
    let miss = traj(Vec2::new(0.0, 300.0), 0.0, 0.0, 10);
    let hit = traj(Vec2::new(1.0, 0.0), 0.0, 0.0, 10);
    let set = set_of(4, vec![miss, hit], vec![0.9, 0.1]);
    let plan = select_adversarial(&[set], &[(ego, 1.0)], Dims::default()).unwrap();
    assert_eq!(plan.selections[&4].maneuver, "m1");
    assert!((plan.objective[&4] - 0.1).abs() < 1e-15);
}

#[test]
fn single_candidate_is_forced() {
    let ego = traj(Vec2::ZERO, 0.0, 5.0, 10);
    let set = set_of(1, vec![traj(Vec2::new(20.0, 20.0), 1.0, 3.0, 10)], vec![1.0]);
    let plan = select_adversarial(&[set], &[(ego, 1.0)], Dims::default()).unwrap();
    assert_eq!(plan.selections[&1].maneuver, "m0");
}

/// Exhaustive product enumeration over all joint choices.
fn brute_force(priors: &[Vec<f64>], lik: &[Vec<Vec<f64>>], w: &[f64]) -> Vec<usize> {
    let mut best = (f64::NEG_INFINITY, vec![]);
    let sizes: Vec<usize> = priors.iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().product();
    for mut code in 0..total {
        let mut choice = Vec::new();
        for s in &sizes {
            choice.push(code % s);
            code /= s;
        }
        let mut value = 1.0;
        for (i, &c) in choice.iter().enumerate() {
            let e: f64 = lik[i][c].iter().zip(w).map(|(l, w)| l * w).sum();
            value *= priors[i][c] * e;
        }
        // Enumeration order is not lexicographic, so resolve exact ties explicitly.
        if value > best.0 || (value == best.0 && choice < best.1) {
            best = (value, choice);
        }
    }
    best.1
}

#[test]
fn factorized_argmax_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let attackers = rng.random_range(1..=3);
        let egos = rng.random_range(1..=4);
        let mut w: Vec<f64> = (0..egos).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        let mut priors = Vec::new();
        let mut lik = Vec::new();
        for _ in 0..attackers {
            let n = rng.random_range(1..=8);
            let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            let z: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= z);
            priors.push(p);
            lik.push(
                (0..n)
                    .map(|_| (0..egos).map(|_| if rng.random_bool(0.2) { 1.0 } else { rng.random_range(1e-6..1.0) }).collect())
                    .collect::<Vec<Vec<f64>>>(),
            );
        }
        let fast: Vec<usize> = priors
            .iter()
            .zip(&lik)
            .map(|(p, l)| argmax_factorized(p, l, &w).0)
            .collect();
        assert_eq!(fast, brute_force(&priors, &lik, &w));
    }
}

#[test]
fn buffer_prediction_and_policy_prediction() {
    let set = corpus();
    let s = &set.scenarios[0];
    let mut buf = EgoBuffer::default();
    assert!(ego_predict(EgoSource::Buffer(&buf), s).is_err());
    for k in 0..3 {
        buf.push(&s.id, s.ego.samples[..(30 + k)].to_vec());
    }
    let h = ego_predict(EgoSource::Buffer(&buf), s).unwrap();
    assert_eq!(h.len(), 3);
    assert!(h.iter().all(|(t, _)| t.len() == s.horizon_steps));
    let w: Vec<f64> = h.iter().map(|x| x.1).collect();
    assert!((w[0] - 4.0 / 7.0).abs() < 1e-12);

    let mut replay = ReplayAgent::new();
    let p = ego_predict(EgoSource::Policy(&mut replay), s).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].1, 1.0);
}

#[test]
fn likelihood_is_monotone_in_gap() {
    let d = Dims::default();
    let ego = traj(Vec2::ZERO, 0.0, 0.0, 5);
    let mut last = 0.0;
    for gap in [10.0, 5.0, 2.0, 1.0, 0.5, 0.1, 0.0] {
        let other = traj(Vec2::new(4.5 + gap, 0.0), 0.0, 0.0, 5);
        let l = collision_likelihood(&ego, d, &other, d).unwrap();
        assert!(l >= last && l > 0.0 && l <= 1.0);
        last = l;
    }
    assert_eq!(last, 1.0);
}

#[test]
fn plans_replay_through_the_engine() {
    let set = corpus();
    for s in &set.scenarios {
        let ids: Vec<u32> = s.background_ids().into_iter().take(2).collect();
        let egos = ego_predict(EgoSource::Policy(&mut ReplayAgent::new()), s).unwrap();
        let plan = plan_attack(s, &ids, &egos).unwrap();
        assert_eq!(plan.selections.len(), ids.len());
        let back = AdversarialPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(back.selections.keys().collect::<Vec<_>>(), plan.selections.keys().collect::<Vec<_>>());
        let a = rollout(s, &mut ReplayAgent::new(), Some(&plan)).unwrap();
        let b = rollout(s, &mut ReplayAgent::new(), Some(&plan)).unwrap();
        assert_eq!(a, b);
    }
}
