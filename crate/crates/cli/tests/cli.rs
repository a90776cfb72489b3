use std::path::Path;
use std::process::{Command, Output};

use prefxfer_core::formats::{
    parse_report, parse_results, parse_weights, serialize_weights, WeightsRecord,
};
use prefxfer_core::WeightVector;

fn prefxfer(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefxfer"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = prefxfer(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn evaluate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "evaluate", "--users", "6", "--seed", "7", "--trials", "10", "--format", "csv",
            "--out", out,
        ]
    };
    let csv_a = ok(&args("a.json"), dir.path());
    let csv_b = ok(&args("b.json"), dir.path());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv_a, csv_b);
    assert!(csv_a.starts_with("condition,timestep,mean,se\n"));
    assert_eq!(csv_a.lines().count(), 1 + 3 * 17);
    let parsed = parse_results(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(parsed.summary.n_users, 6);
}

#[test]
fn corpus_evaluation_matches_simulated_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &[
            "simulate", "--users", "5", "--seed", "11", "--out", "corpus",
        ],
        d,
    );
    ok(
        &[
            "evaluate", "--users", "5", "--seed", "11", "--trials", "8", "--out", "sim.json",
        ],
        d,
    );
    ok(
        &[
            "evaluate",
            "--corpus",
            "corpus",
            "--seed",
            "11",
            "--trials",
            "8",
            "--out",
            "corpus.json",
        ],
        d,
    );
    let sim = parse_results(&std::fs::read_to_string(d.join("sim.json")).unwrap()).unwrap();
    let corpus = parse_results(&std::fs::read_to_string(d.join("corpus.json")).unwrap()).unwrap();
    assert_eq!(sim.summary, corpus.summary);
    assert_ne!(sim.config.users, corpus.config.users);
}

#[test]
fn learn_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &["simulate", "--users", "1", "--seed", "2", "--out", "."],
        d,
    );
    let text = ok(
        &[
            "learn",
            "--ratings",
            "sim-000.canonical.ratings.toml",
            "--trace",
            "sim-000.canonical.trace.toml",
            "--out",
            "w.toml",
            "--format",
            "machine",
        ],
        d,
    );
    let w = parse_weights(&text).unwrap();
    assert_eq!(
        w,
        parse_weights(&std::fs::read_to_string(d.join("w.toml")).unwrap()).unwrap()
    );
    assert_eq!(w.user_id, "sim-000");
    assert!(w.diagnostics.unwrap().converged);

    let csv = ok(
        &[
            "predict",
            "--ratings",
            "sim-000.actual.ratings.toml",
            "--weights",
            "w.toml",
            "--trace",
            "sim-000.actual.trace.toml",
            "--out",
            "report.json",
            "--format",
            "csv",
        ],
        d,
    );
    assert_eq!(csv.lines().count(), 18);
    let report = parse_report(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.report.steps.len(), 17);
    assert!(report.report.steps.last().unwrap().hit);

    // without a trace: the greedy plan
    let plan = ok(
        &[
            "predict",
            "--ratings",
            "sim-000.actual.ratings.toml",
            "--weights",
            "w.toml",
            "--format",
            "machine",
        ],
        d,
    );
    let plan: Vec<usize> = serde_json::from_str(&plan).unwrap();
    assert_eq!(plan.len(), 17);
}

#[test]
fn zero_weights_warn_about_ties() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--users", "1", "--out", "."], d);
    let rec = WeightsRecord {
        user_id: "z".into(),
        source_task: "canonical".into(),
        weights: WeightVector::ZERO,
        diagnostics: None,
    };
    std::fs::write(d.join("zero.toml"), serialize_weights(&rec)).unwrap();
    let out = prefxfer(
        &[
            "predict",
            "--ratings",
            "sim-000.actual.ratings.toml",
            "--weights",
            "zero.toml",
            "--format",
            "csv",
        ],
        d,
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ties"));
    // every step picks the lowest feasible id
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("step,action\n0,0\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--users", "1", "--out", "."], d);

    let usage = prefxfer(&["learn"], d);
    assert_eq!(usage.status.code(), Some(2));

    let io = prefxfer(&["learn", "--ratings", "missing.toml", "--trace", "x"], d);
    assert_eq!(io.status.code(), Some(3));
    let err = String::from_utf8_lossy(&io.stderr);
    assert!(err.starts_with("error: missing.toml"), "{err}");
    assert_eq!(err.lines().count(), 1);

    // actual-task ratings handed to the canonical learner
    let wrong = prefxfer(
        &[
            "learn",
            "--ratings",
            "sim-000.actual.ratings.toml",
            "--trace",
            "sim-000.canonical.trace.toml",
        ],
        d,
    );
    assert_eq!(wrong.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&wrong.stderr).contains("expected `canonical`"));

    std::fs::write(
        d.join("bad.toml"),
        "schema = \"demo-trace/1\"\nuser_id = 3\n",
    )
    .unwrap();
    let bad = prefxfer(
        &[
            "learn",
            "--ratings",
            "sim-000.canonical.ratings.toml",
            "--trace",
            "bad.toml",
        ],
        d,
    );
    assert_eq!(bad.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line"));

    let zero_trials = prefxfer(&["evaluate", "--users", "2", "--trials", "0"], d);
    assert_eq!(zero_trials.status.code(), Some(4));
}

#[test]
fn corpus_with_missing_trace_names_the_user() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--users", "2", "--out", "c"], d);
    std::fs::remove_file(d.join("c/sim-001.actual.trace.toml")).unwrap();
    let out = prefxfer(&["evaluate", "--corpus", "c"], d);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sim-001") && err.contains("trace"), "{err}");
}
