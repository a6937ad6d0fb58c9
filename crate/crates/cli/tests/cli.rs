use std::path::Path;
use std::process::{Command, Output};

use adversim::record::{build_report, RunRecord};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adversim"))
        .args(args)
        .env_remove("ADVERSIM_LLM_URL")
        .env_remove("ADVERSIM_LLM_MODEL")
        .env_remove("ADVERSIM_LLM_KEY")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn corpus(dir: &Path) -> String {
    let out = dir.join("set").display().to_string();
    assert_eq!(code(&["gen-corpus", "--seed", "3", "--n", "4", "--out", &out]), 0);
    out
}

#[test]
fn validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let set = corpus(tmp.path());
    let out = tmp.path().join("o").display().to_string();
    assert_eq!(code(&["gen-corpus", "--seed", "1", "--n", "0", "--out", &out]), 2);
    assert_eq!(code(&["gen-corpus", "--seed", "1", "--n", "3", "--split", "dev", "--out", &out]), 2);
    assert_eq!(code(&["attack", "--set", &set, "--method", "nearest", "--n-attackers", "1", "--out", &out]), 2);
    assert_eq!(
        code(&["attack", "--set", &set, "--method", "program", "--program", "dist +", "--n-attackers", "1", "--out", &out]),
        2
    );
    assert_eq!(code(&["attack", "--set", &set, "--n-attackers", "99", "--out", &out]), 2);
    assert_eq!(code(&["attack", "--set", &set, "--n-attackers", "1", "--agent", "policy", "--out", &out]), 2);

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[corpus]\nn = 4\n[search]\ncandidates_per_iter = 0\n").unwrap();
    assert_eq!(code(&["search", "--config", &cfg.display().to_string(), "--out", &out]), 2);
    std::fs::write(&cfg, "[corpus]\nn = 4\nsurprise = 1\n").unwrap();
    assert_eq!(code(&["search", "--config", &cfg.display().to_string(), "--out", &out]), 2);
}

#[test]
fn missing_backend_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("s.toml");
    std::fs::write(&cfg, "[corpus]\nn = 4\n").unwrap();
    let out = tmp.path().join("o").display().to_string();
    let o = run(&["search", "--config", &cfg.display().to_string(), "--client", "http", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ADVERSIM_LLM_URL"));
}

#[test]
fn missing_files_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope").display().to_string();
    let out = tmp.path().join("o").display().to_string();
    assert_eq!(code(&["report", "--runs", &missing, "--out", &out]), 1);
}

#[test]
fn identify_prints_ranking() {
    let tmp = tempfile::tempdir().unwrap();
    let set = corpus(tmp.path());
    let first = std::fs::read_dir(&set)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "set.json")
        .min()
        .unwrap();
    let o = run(&["identify", "--scenario", &first.display().to_string(), "--method", "min_ttc", "--n-attackers", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let attackers = v["attackers"].as_array().unwrap();
    let ranking = v["ranking"].as_array().unwrap();
    assert_eq!(attackers.len(), 2);
    assert_eq!(attackers[0], ranking[0][0]);
    assert_eq!(attackers[1], ranking[1][0]);
}

#[test]
fn attack_and_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let set = corpus(tmp.path());
    let atk = tmp.path().join("atk");
    assert_eq!(
        code(&["attack", "--set", &set, "--method", "kinetic_field", "--n-attackers", "1", "--out", &atk.display().to_string()]),
        0
    );
    assert_eq!(std::fs::read_dir(atk.join("plans")).unwrap().count(), 4);
    assert_eq!(std::fs::read_dir(atk.join("rollouts")).unwrap().count(), 4);
    let rec = RunRecord::load(&atk).unwrap();
    let RunRecord::Attack { success_rate, scenarios, .. } = &rec else {
        panic!("wrong record kind")
    };
    assert_eq!(*scenarios, 4);
    assert_eq!((success_rate * 4.0).fract(), 0.0);

    let report = build_report(std::slice::from_ref(&rec));
    assert_eq!(report.success.len(), 1);
    assert_eq!(report.realism.len(), 1);
    assert!(report.provenance.contains_key(rec.run_id()));

    let a = tmp.path().join("ra");
    let b = tmp.path().join("rb");
    for dir in [&a, &b] {
        let d = dir.display().to_string();
        assert_eq!(code(&["report", "--runs", &atk.display().to_string(), "--out", &d, "--formats", "json,csv"]), 0);
    }
    for f in ["report.json", "success.csv", "realism.csv", "training.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("search.svg").exists());
}
