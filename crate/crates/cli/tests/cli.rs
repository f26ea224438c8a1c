use std::path::Path;
use std::process::Command;

use bellcom_cli::{run_command, RunConfig};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_command(std::iter::once("bellcom").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn golden_outputs() {
    let cases: [(&[&str], &str); 7] = [
        (&["bound", "--ineq", "gyni"], "bound_gyni.json"),
        (&["bound", "--ineq", "svetlichny"], "bound_svetlichny.json"),
        (&["bound", "--ineq", "chsh", "--ccp"], "bound_chsh_ccp.json"),
        (&["eval", "--ineq", "svetlichny", "--strategy", "svetlichny-paper"], "eval_svetlichny.json"),
        (&["eval", "--ineq", "gyni", "--strategy", "gyni-paper", "--format", "csv"], "eval_gyni.csv"),
        (&["report"], "report.json"),
        (&["simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "5", "--seed", "3", "--dump-config"], "dump_simulate.json"),
    ];
    for (args, file) in cases {
        let (code, out, err) = run(args);
        assert_eq!(code, 0, "{args:?}: {err}");
        assert_eq!(out, golden(file), "{args:?}");
    }
}

#[test]
fn bound_prints_integers_as_integers() {
    let (_, out, _) = run(&["bound", "--ineq", "gyni"]);
    assert_eq!(out.trim(), r#"{"classical_bound":6,"success_bound":0.875}"#);
}

#[test]
fn eval_svetlichny_paper_values() {
    let (_, out, _) = run(&["eval", "--ineq", "svetlichny", "--strategy", "svetlichny-paper"]);
    let v = json(&out);
    assert!((v["bell_value"].as_f64().unwrap() - 5.656854).abs() < 1e-6);
    assert!((v["success"].as_f64().unwrap() - 0.853553).abs() < 1e-6);
    assert_eq!(v["violation"], true);
}

#[test]
fn output_keys_are_stable() {
    let keys = |args: &[&str]| -> Vec<String> {
        let (code, out, err) = run(args);
        assert_eq!(code, 0, "{err}");
        json(&out).as_object().unwrap().keys().cloned().collect()
    };
    assert_eq!(
        keys(&["eval", "--ineq", "gyni", "--strategy", "experiment-like"]),
        [
            "inequality",
            "strategy_kind",
            "bell_value",
            "gamma",
            "normalized_value",
            "success",
            "classical_bound",
            "classical_success_bound",
            "violation"
        ]
    );
    assert_eq!(
        keys(&["simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "50", "--seed", "1"]),
        ["rounds", "successes", "estimate", "std_error"]
    );
    assert_eq!(
        keys(&["optimize", "--ineq", "chsh", "--seed", "1", "--restarts", "2"]),
        [
            "inequality",
            "best_value",
            "success",
            "classical_bound",
            "violation",
            "seed",
            "restarts",
            "winning_restart",
            "sweeps_used",
            "degenerate_updates",
            "strategy"
        ]
    );
    assert_eq!(keys(&["verify", "--seed", "2", "--count", "3"]), ["tolerance", "checks", "pass"]);
}

#[test]
fn validation_errors_exit_one() {
    let cases: [&[&str]; 9] = [
        &["simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "0", "--seed", "1"],
        &["simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "10"],
        &["optimize", "--ineq", "gyni"],
        &["verify"],
        &["eval", "--ineq", "gyni", "--strategy", "gyni-paper", "--noise-v", "1.5"],
        &["eval", "--ineq", "gyni", "--strategy", "svetlichny-paper"],
        &["bound", "--ineq", "nope"],
        &["frobnicate"],
        &["bound", "--ineq", "gyni", "--threads", "0"],
    ];
    for args in cases {
        let (code, _, err) = run(args);
        assert_eq!(code, 1, "{args:?}");
        assert!(!err.is_empty());
    }
}

#[test]
fn oversized_protocol_search_needs_long_running() {
    let (code, _, err) = run(&["bound", "--ineq", "gyni", "--ccp"]);
    assert_eq!(code, 1);
    assert!(err.contains("guard"), "{err}");
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ineq_path = dir.path().join("ineq.json");
    std::fs::write(
        &ineq_path,
        r#"{"scenario": {"n": 2, "visibility": [[1], [2, 1]]}, "coeffs": [{"x": [1, 1], "q": 2}, {"x": [-1, 1], "q": -1.5}]}"#,
    )
    .unwrap();
    let (_, strategy_text, _) = run(&["optimize", "--ineq", "svetlichny", "--seed", "4", "--restarts", "2"]);
    let strategy_path = dir.path().join("strategy.json");
    std::fs::write(&strategy_path, json(&strategy_text)["strategy"].to_string()).unwrap();
    let ineq = ineq_path.to_str().unwrap();
    let strategy = strategy_path.to_str().unwrap();

    let invocations: Vec<Vec<&str>> = vec![
        vec!["bound", "--ineq", ineq, "--ccp", "--family", "product-form"],
        vec!["optimize", "--ineq", "gyni", "--seed", "9", "--restarts", "3", "--tol", "1e-10", "--optimize-state"],
        vec!["eval", "--ineq", "svetlichny", "--strategy", strategy, "--noise-v", "0.5", "--format", "csv"],
        vec!["simulate", "--ineq", "gyni", "--strategy", "experiment-like", "--rounds", "7", "--seed", "2", "--randomness", "file:/tmp/bits", "--threads", "2"],
        vec!["verify", "--seed", "1", "--count", "5"],
        vec!["report"],
    ];
    for args in invocations {
        let mut with_dump = args.clone();
        with_dump.push("--dump-config");
        let (code, first, err) = run(&with_dump);
        assert_eq!(code, 0, "{args:?}: {err}");
        let path = dir.path().join("run.json");
        std::fs::write(&path, &first).unwrap();
        let (code, second, err) = run(&["--config", path.to_str().unwrap(), "--dump-config"]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(first, second);
        let a: RunConfig = serde_json::from_str(&first).unwrap();
        assert_eq!(a, RunConfig::load(&path).unwrap());
    }
}

#[test]
fn config_file_runs_like_the_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (_, dumped, _) = run(&["eval", "--ineq", "gyni", "--strategy", "gyni-paper", "--dump-config"]);
    let path = dir.path().join("run.json");
    std::fs::write(&path, dumped).unwrap();
    let (_, from_file, _) = run(&["--config", path.to_str().unwrap()]);
    let (_, from_flags, _) = run(&["eval", "--ineq", "gyni", "--strategy", "gyni-paper"]);
    assert_eq!(from_file, from_flags);
}

#[test]
fn simulate_writes_a_replayable_log() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let (code, _, err) = run(&[
            "simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "40", "--seed", "5", "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn beacon_record_files_drive_simulations() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.txt");
    let body: String = (0..20).map(|i| format!("{:0128x}\n", (i as u128 + 7) * 0x2545_f491_4f6c_dd1d_u128)).collect();
    std::fs::write(&records, body).unwrap();
    let source = format!("beacon:{}", records.display());
    let args = ["simulate", "--ineq", "gyni", "--strategy", "classical-witness", "--rounds", "100", "--seed", "1", "--randomness", &source];
    let (code, first, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(run(&args).1, first);
    let too_many = ["simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "1000", "--seed", "1", "--randomness", &source];
    let (code, _, err) = run(&too_many);
    assert_eq!(code, 1);
    assert!(err.contains("exhausted after 292"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bellcom");
    let ok = Command::new(bin).args(["bound", "--ineq", "svetlichny"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim(), r#"{"classical_bound":4,"success_bound":0.75}"#);
    let bad = Command::new(bin).args(["simulate", "--ineq", "gyni", "--strategy", "gyni-paper", "--rounds", "0", "--seed", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let unknown = Command::new(bin).arg("--bogus").output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
