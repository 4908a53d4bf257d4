use std::path::Path;
use std::process::{Command, Output};

fn dogbaro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dogbaro")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn evaluates_named_strategies() {
    let text = stdout(&dogbaro(&["evaluate", "nb"]));
    assert!(text.contains("policy mmnn (nb, hidden mode)"), "{text}");
    assert!(text.contains("expected return 2.0600"), "{text}");

    let text = stdout(&dogbaro(&["evaluate", "nw_p", "--visible", "--eval-episodes", "5000", "--seed", "3"]));
    assert!(text.contains("expected return 5.4000"), "{text}");
    assert!(text.contains("agrees within 3 SE"), "{text}");
}

#[test]
fn enumeration_lists_every_policy() {
    let text = stdout(&dogbaro(&["enumerate"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 257);
    assert!(lines[1].starts_with("1,wwnn,") && lines[1].ends_with(",nw_b"), "{}", lines[1]);
}

#[test]
fn bad_input_fails_with_a_message() {
    let out = dogbaro(&["evaluate", "not_a_strategy"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "agent = \"a2c\"\n\n[a2c]\nn_steps = \"five\"\n").unwrap();
    let out = dogbaro(&["experiment", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn trained_network_can_be_evaluated_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = stdout(&dogbaro(&["train", "--agent", "a2c", "--episodes", "300", "--seed", "1", "--out", out]));
    assert!(text.starts_with("a2c seed 1: policy "), "{text}");
    for file in ["policy.txt", "network.ckpt", "policy_stochastic.txt"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let code = text.split_whitespace().nth(4).unwrap();
    let from_ckpt = stdout(&dogbaro(&["evaluate", dir.path().join("network.ckpt").to_str().unwrap()]));
    let from_file = stdout(&dogbaro(&["evaluate", dir.path().join("policy.txt").to_str().unwrap()]));
    assert!(from_ckpt.starts_with(&format!("policy {code} ")), "{from_ckpt}");
    assert_eq!(from_ckpt, from_file);
}

#[test]
fn small_experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp");
    let text = stdout(&dogbaro(&[
        "experiment",
        "--agent",
        "q_replay",
        "--visible",
        "--runs",
        "2",
        "--episodes",
        "500",
        "--eval-episodes",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("mean reward"), "{text}");
    for file in ["runs.csv", "summary.csv", "result.json"] {
        assert!(Path::new(&out).join(file).exists(), "{file}");
    }
    assert_eq!(std::fs::read_to_string(out.join("runs.csv")).unwrap().lines().count(), 3);
}

#[test]
fn solve_reports_the_pressure_policy() {
    let text = stdout(&dogbaro(&["solve", "--visible"]));
    assert!(text.contains("observation policy: wwwwnnnn (nw_p)"), "{text}");
}
