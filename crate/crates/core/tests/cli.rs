use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safe-wncs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

const SMALL: [&str; 8] = [
    "--set",
    "network.nodes=3",
    "--set",
    "run.episodes=60",
    "--set",
    "run.warmup_frames=40",
    "--set",
    "agent.batch_size=16",
];

fn train(dir: &Path, seed: &str, policy: &str) -> Output {
    let mut args = vec!["train", "--seed", seed, "--policy", policy, "--out-dir", dir.to_str().unwrap()];
    args.extend(SMALL);
    run(&args)
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bad_config_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(train(dir.path(), "0", "nonsense").status.code(), Some(2));
    let out = dir.path().to_str().unwrap();
    let o = run(&["train", "--seed", "0", "--policy", "random", "--out-dir", out, "--set", "network.nodes=0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["train", "--seed", "0", "--policy", "random", "--out-dir", out, "--set", "nosuch.key=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_files_exit_4() {
    assert_eq!(run(&["metrics", "--events", "/nonexistent/events.jsonl"]).status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "train",
        "--seed",
        "0",
        "--policy",
        "random",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--config",
        "/nonexistent/run.toml",
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sabotaged_oracles_exit_3() {
    let o = run(&["validate", "--sabotage", "floor-off-by-one"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn same_seed_same_log() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(train(a.path(), "3", "teacher_student").status.success());
    assert!(train(b.path(), "3", "teacher_student").status.success());
    let la = std::fs::read(a.path().join("events.jsonl")).unwrap();
    let lb = std::fs::read(b.path().join("events.jsonl")).unwrap();
    assert!(!la.is_empty());
    assert_eq!(la, lb);
}

/// Counts straight from the JSON lines, without the library's types.
#[test]
fn summary_matches_a_direct_count() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), "1", "random").status.success());
    let log = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();

    for phase in ["warmup", "train"] {
        let (mut frames, mut power, mut sched, mut violating, mut faults) = (0u64, 0u64, 0u64, 0u64, 0u64);
        let mut reward = 0.0;
        for line in log.lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            if v["phase"] != phase {
                continue;
            }
            if v["kind"] == "safety_fault" {
                faults += 1;
                continue;
            }
            frames += 1;
            let p = v["power_ok"].as_array().unwrap().iter().filter(|b| !b.as_bool().unwrap()).count() as u64;
            let s = !v["sched_ok"].as_bool().unwrap();
            power += p;
            sched += u64::from(s);
            violating += u64::from(p > 0 || s);
            reward += v["reward"].as_f64().unwrap();
        }
        let got = &summary["phases"][phase];
        assert_eq!(got["frames"], frames, "{phase}");
        assert_eq!(got["power_violations"], power, "{phase}");
        assert_eq!(got["scheduling_violations"], sched, "{phase}");
        assert_eq!(got["violating_frames"], violating, "{phase}");
        assert_eq!(got["safety_faults"], faults, "{phase}");
        // One frame per episode in this configuration.
        let mean = reward / frames as f64;
        let want = got["mean_episode_reward"].as_f64().unwrap();
        assert!((mean - want).abs() <= 1e-9 * mean.abs(), "{phase}: {mean} vs {want}");
    }

    let o = run(&["metrics", "--events", dir.path().join("events.jsonl").to_str().unwrap()]);
    assert!(o.status.success());
}

#[test]
fn checkpoint_round_trip_and_shape_check() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train(dir.path(), "2", "teacher_student").status.success());
    let ckpt = dir.path().join("checkpoint");
    let test_dir = dir.path().join("test");
    let mut args = vec![
        "test",
        "--seed",
        "2",
        "--policy",
        "teacher_student",
        "--out-dir",
        test_dir.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--set",
        "run.test_episodes=20",
    ];
    args.extend(SMALL);
    assert!(run(&args).status.success());
    assert!(test_dir.join("events.jsonl").exists());

    // Same checkpoint, different node count.
    let i = args.len() - 7;
    args[i] = "network.nodes=4";
    assert_eq!(run(&args).status.code(), Some(2));
}
