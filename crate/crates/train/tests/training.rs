use adversim_core::attack::{attack_scenario, PlanMode};
use adversim_core::corpus::{generate_corpus, TemplateWeights};
use adversim_core::identifier::{IdentifierMethod, KineticParams};
use adversim_core::sim::{rollout, ReplayAgent};
use adversim_train::checkpoint::{decode_checkpoint, encode_checkpoint};
use adversim_train::{
    aggregate, curves_csv, evaluate, evaluate_agent, load_checkpoint, save_checkpoint, train_adversarial,
    CheckpointMeta, Condition, ConditionMetrics, EvalMetrics, Policy, TrainConfig, TrainError,
};

fn kf() -> IdentifierMethod {
    IdentifierMethod::KineticField(KineticParams::default())
}

fn small_cfg(steps: usize) -> TrainConfig {
    let mut c = TrainConfig {
        max_steps: steps,
        eval_every: 1000,
        ..Default::default()
    };
    c.learner.random_steps = 300;
    c.learner.learning_starts = 300;
    c
}

#[test]
fn smoke_run_emits_snapshots() {
    let set = generate_corpus(3, 14, &TemplateWeights::uniform()).unwrap();
    let (train, test) = set.scenarios.split_at(10);
    let out = train_adversarial(&small_cfg(2000), train, &test[..2], &kf()).unwrap();
    assert_eq!(out.steps, 2000);
    let steps: Vec<usize> = out.curves.iter().map(|c| c.step).collect();
    assert_eq!(steps, vec![1000, 1000, 1000, 2000, 2000, 2000]);
    assert!(out.adversarial_episodes > 0 && out.adversarial_episodes < out.episodes);
    assert_eq!(curves_csv(&out.curves).lines().count(), 7);
}

#[test]
fn zero_fraction_never_attacks() {
    let set = generate_corpus(3, 6, &TemplateWeights::uniform()).unwrap();
    let cfg = TrainConfig {
        adversarial_fraction: 0.0,
        ..small_cfg(800)
    };
    let out = train_adversarial(&cfg, &set.scenarios, &[], &kf()).unwrap();
    assert_eq!(out.adversarial_episodes, 0);
    assert!(out.curves.is_empty());
}

#[test]
fn ego_buffer_grows_one_per_episode() {
    let set = generate_corpus(4, 1, &TemplateWeights::uniform()).unwrap();
    let id = set.scenarios[0].id.clone();
    for steps in [50, 200, 400, 2000] {
        let out = train_adversarial(&small_cfg(steps), &set.scenarios, &[], &kf()).unwrap();
        assert_eq!(out.ego_buffer.len(&id), out.episodes.min(8), "{steps} steps");
    }
}

#[test]
fn training_is_reproducible() {
    let set = generate_corpus(5, 6, &TemplateWeights::uniform()).unwrap();
    let cfg = small_cfg(1500);
    let run = || {
        let out = train_adversarial(&cfg, &set.scenarios[..4], &set.scenarios[4..], &kf()).unwrap();
        let meta = CheckpointMeta {
            step: out.steps,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            learner: cfg.learner.clone(),
        };
        (encode_checkpoint(&out.policy, &meta), out.curves)
    };
    let (a, ca) = run();
    let (b, cb) = run();
    assert_eq!(a, b);
    assert_eq!(ca, cb);

    let other = TrainConfig { seed: 1, ..cfg.clone() };
    assert_ne!(cfg.hash(), other.hash());
}

#[test]
fn checkpoint_round_trip() {
    let set = generate_corpus(6, 3, &TemplateWeights::uniform()).unwrap();
    let cfg = small_cfg(600);
    let mut out = train_adversarial(&cfg, &set.scenarios, &[], &kf()).unwrap();
    let meta = CheckpointMeta {
        step: out.steps,
        config_hash: cfg.hash(),
        seed: 9,
        learner: cfg.learner.clone(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    save_checkpoint(&path, &out.policy, &meta).unwrap();
    let (mut back, m) = load_checkpoint(&path).unwrap();
    assert_eq!(m, meta);
    let s = &set.scenarios[0];
    let a = rollout(s, &mut adversim_train::PolicyAgent::new(&mut out.policy, false), None).unwrap();
    let b = rollout(s, &mut adversim_train::PolicyAgent::new(&mut back, false), None).unwrap();
    assert_eq!(a, b);

    let bytes = encode_checkpoint(&back, &m);
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_checkpoint(&bad).unwrap_err().contains("magic"));
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(TrainError::Checkpoint { .. })));
}

#[test]
fn evaluation_counts_by_hand() {
    let set = generate_corpus(12, 25, &TemplateWeights::uniform()).unwrap();
    let m = evaluate_agent(&mut ReplayAgent::new(), &set.scenarios, &Condition::ALL, &kf()).unwrap();
    let normal = m.get(Condition::Normal).unwrap();
    assert_eq!(normal.crashes, 0);
    assert_eq!(normal.crash_rate, 0.0);
    for c in [Condition::OneAttacker, Condition::TwoAttackers] {
        let mut hits = 0;
        for s in &set.scenarios {
            hits += attack_scenario(s, &kf(), c.attackers(), &mut ReplayAgent::new(), PlanMode::Optimize)
                .unwrap()
                .result
                .collided as usize;
        }
        let got = m.get(c).unwrap();
        assert_eq!(got.crashes, hits);
        assert_eq!(got.crash_rate, hits as f64 / 25.0);
        assert_eq!(got.crash_rate * 25.0, (got.crash_rate * 25.0).round());
    }
    for c in &m.conditions {
        assert!((0.0..=1.0).contains(&c.route_completion));
    }
}

#[test]
fn deterministic_policy_evaluation_repeats() {
    let set = generate_corpus(13, 5, &TemplateWeights::uniform()).unwrap();
    let mut out = train_adversarial(&small_cfg(500), &set.scenarios, &[], &kf()).unwrap();
    let a = evaluate(&mut out.policy, &set.scenarios, &Condition::ALL, &kf()).unwrap();
    let b = evaluate(&mut out.policy, &set.scenarios, &Condition::ALL, &kf()).unwrap();
    assert_eq!(a, b);
    let obs = rollout(&set.scenarios[0], &mut ReplayAgent::new(), None).unwrap().per_step[0].observation;
    out.policy.reset();
    let first = out.policy.act(&obs, false);
    out.policy.reset();
    assert_eq!(first, out.policy.act(&obs, false));
}

fn metrics(crash: f64) -> EvalMetrics {
    EvalMetrics {
        conditions: vec![ConditionMetrics {
            condition: Condition::Normal,
            episodes: 10,
            crashes: (crash * 10.0) as usize,
            crash_rate: crash,
            route_completion: 0.9,
        }],
    }
}

#[test]
fn repeat_aggregation() {
    let agg = aggregate(&[metrics(0.2), metrics(0.3), metrics(0.4)]);
    assert_eq!(agg.len(), 1);
    assert!((agg[0].crash_rate - 0.3).abs() < 1e-12);
    assert!((agg[0].crash_spread - 0.005).abs() < 1e-12);
    assert!(agg[0].completion_spread.abs() < 1e-12);
    let one = aggregate(&[metrics(0.7)]);
    assert_eq!(one[0].crash_spread, 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let set = generate_corpus(3, 2, &TemplateWeights::uniform()).unwrap();
    for cfg in [
        TrainConfig { max_steps: 0, ..Default::default() },
        TrainConfig { adversarial_fraction: 1.5, ..Default::default() },
    ] {
        assert!(matches!(train_adversarial(&cfg, &set.scenarios, &[], &kf()), Err(TrainError::Config(_))));
    }
}
