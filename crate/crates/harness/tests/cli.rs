use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spotflow_core::cloud::OobProbabilityModel;
use spotflow_core::workflow::parse_workflow;
use spotflow_harness::experiment::read_records;

fn spotflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spotflow"))
        .args(args)
        .env_remove("SPOTFLOW_WORKERS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_workflow_writes_a_parsable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wf.json");
    let o = spotflow(&["gen-workflow", "--family", "montage-like", "--tasks", "500", "--seed", "7", "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let w = parse_workflow(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(w.len(), 500);

    let o = spotflow(&["validate", "--workflow", path(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("500 tasks"));
}

#[test]
fn estimate_oob_ignores_data_after_the_split() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    fs::write(
        &trace,
        "timestamp,instance_type,price\n0,t2.micro,0.004\n3600,t2.micro,0.005\n7200,t2.micro,0.004\n14400,t2.micro,0.012\n",
    )
    .unwrap();
    let model_path = dir.path().join("m.json");
    let o = spotflow(&["estimate-oob", "--trace", path(&trace), "--until", "14400", "--output", path(&model_path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = OobProbabilityModel::from_json(&fs::read_to_string(&model_path).unwrap()).unwrap();
    let curve = model.curve("t2.micro").unwrap();
    // the 0.012 spike at the split never enters the grid or the counts
    assert!(curve.probability(0.0055) == 0.0);
    assert!(curve.bids.iter().all(|&b| b <= 0.013));
}

#[test]
fn run_then_report_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{
            "workflow": {"generated": {"family": "cybershake-like", "tasks": 30, "seed": 1}},
            "trace": {"synthetic": {"training_days": 3, "test_days": 3}},
            "strategies": {
                "cmi": {"max_evaluations": 600, "population_size": 30},
                "siaa": {"spot_ratios": [0.0, 1.0], "confidences": [0.1]}
            },
            "budget": 0.5,
            "repetitions": 3,
            "output_dir": "out"
        }"#,
    )
    .unwrap();
    let o = spotflow(&["validate", "--config", path(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = spotflow(&["run", "--config", path(&cfg), "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let records = read_records(&out.join("records.ndjson")).unwrap();
    assert_eq!(records.len(), 9);
    assert!(records.iter().all(|r| r.error.is_none()));
    assert!(out.join("steps").join("cmi-s0.csv").exists());

    let first = out.join("first");
    let second = out.join("second");
    for target in [&first, &second] {
        let o = spotflow(&["report", "--records", path(&out.join("records.ndjson")), "--output", path(target)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["report.csv", "tests.csv", "runs.csv", "report.json"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
    let tests = fs::read_to_string(first.join("tests.csv")).unwrap();
    // header plus one test per spot ratio
    assert_eq!(tests.lines().count(), 3);
}

#[test]
fn bad_flags_exit_with_usage() {
    let o = spotflow(&["gen-workflow", "--family", "montage-like"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = spotflow(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_nonzero() {
    let o = spotflow(&["gen-workflow", "--family", "montage-like", "--tasks", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spotflow(&["validate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spotflow(&["validate", "--trace", "/nonexistent/trace.csv"]);
    assert_eq!(o.status.code(), Some(1));
}
