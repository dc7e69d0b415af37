//! End-to-end runs of the `sirobust` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    format!("{}/corpus/{name}.txn", env!("CARGO_MANIFEST_DIR"))
}

fn sirobust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sirobust")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn run_counts_si_executions() {
    let o = sirobust(&["run", &corpus("ws"), "--mode", "si", "--count"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("executions: 70"), "{}", stdout(&o));
}

#[test]
fn run_assert_reports_reachability() {
    let ser = sirobust(&["run", &corpus("ws"), "--mode", "ser", "--assert", "r1=0 && r2=0"]);
    assert_eq!((code(&ser), stdout(&ser).lines().next().unwrap()), (0, "UNREACHABLE"));
    let si = sirobust(&["run", &corpus("ws"), "--mode", "si", "--assert", "r1=0 && r2=0"]);
    assert_eq!(code(&si), 1);
    assert!(stdout(&si).starts_with("REACHABLE"));
}

#[test]
fn run_prints_the_single_empty_execution() {
    let o = sirobust(&["run", &corpus("empty")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).matches("# execution").count(), 1);
}

#[test]
fn check_exit_codes() {
    let ws = sirobust(&["check", &corpus("ws"), "--method", "all"]);
    assert_eq!(code(&ws), 1);
    assert!(stdout(&ws).contains("non-mover cycle"));
    assert_eq!(code(&sirobust(&["check", &corpus("playlist_mini"), "--method", "cdg"])), 0);
    assert_eq!(code(&sirobust(&["check", &corpus("smallbank_mini")])), 1);
    assert_eq!(code(&sirobust(&["check", &corpus("ws_variant")])), 0);
    // The CDG alone cannot refute robustness.
    assert_eq!(code(&sirobust(&["check", &corpus("ws"), "--method", "cdg"])), 2);
    // robsto is robust only for value-aware traces.
    assert_eq!(code(&sirobust(&["check", &corpus("robsto"), "--method", "enum"])), 1);
    assert_eq!(code(&sirobust(&["check", &corpus("robsto"), "--method", "enum", "--value-aware"])), 0);
}

#[test]
fn check_with_a_small_bound_is_unknown() {
    let o = sirobust(&["check", &corpus("ws_variant"), "--method", "enum", "--bound", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reports_validate_against_the_schema() {
    let schema_path = format!("{}/../../schema/report.schema.json", env!("CARGO_MANIFEST_DIR"));
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for (name, method) in [("ws", "all"), ("empty", "all"), ("robsto", "enum"), ("guarded_swap", "cdg"), ("rwc", "reduce")] {
        let out = scratch(&format!("{name}_{method}.json"));
        sirobust(&["check", &corpus(name), "--method", method, "--json", out.to_str().unwrap()]);
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name} {method}: {errors:?}");
        assert_eq!(report["schema_version"], 1);
    }
}

#[test]
fn crosscheck_the_corpus() {
    let o = sirobust(&["crosscheck", concat!(env!("CARGO_MANIFEST_DIR"), "/corpus")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let empty = scratch("empty_dir");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(code(&sirobust(&["crosscheck", empty.to_str().unwrap()])), 0);
    let random = sirobust(&["crosscheck", "--random", "20", "--seed", "5"]);
    assert_eq!(code(&random), 0);
}

#[test]
fn generate_is_deterministic() {
    let args = ["generate", "--seed", "7", "--count", "3"];
    let (a, b) = (sirobust(&args), sirobust(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).matches("program gen_").count(), 3);
    assert_ne!(stdout(&a), stdout(&sirobust(&["generate", "--seed", "8", "--count", "3"])));
}

#[test]
fn cdg_dot_prints_a_graph() {
    let json = scratch("ws_cdg.json");
    let o = sirobust(&["cdg-dot", &corpus("ws"), "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("digraph"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!(v["edges"].as_array().is_some_and(|e| !e.is_empty()));
}

#[test]
fn errors_exit_with_three() {
    let bad = scratch("bad.txn");
    std::fs::write(&bad, "program broken\nprocess\n").unwrap();
    assert_eq!(code(&sirobust(&["check", bad.to_str().unwrap()])), 3);
    assert_eq!(code(&sirobust(&["check", "/nonexistent.txn"])), 3);
    assert_eq!(code(&sirobust(&["check", &corpus("ws"), "--method", "magic"])), 3);
    assert_eq!(code(&sirobust(&["frobnicate"])), 3);
    assert_eq!(code(&sirobust(&["--help"])), 0);
}
