//! End-to-end tests of the `dekl` binary: exit-status matrix, report
//! determinism, and golden report files for the bundled corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn golden(name: &str) -> PathBuf {
    corpus("golden").join(name)
}

fn dekl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dekl"))
        .args(args)
        .env("DEKL_COLOR", "0")
        .output()
        .expect("binary runs")
}

fn dekl_json(args: &[&str], json_path: &Path) -> (Output, Value) {
    let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    full.push("--json".into());
    full.push(json_path.display().to_string());
    let out = Command::new(env!("CARGO_BIN_EXE_dekl"))
        .args(&full)
        .env("DEKL_COLOR", "0")
        .output()
        .expect("binary runs");
    let text = std::fs::read_to_string(json_path).expect("report written");
    (out, serde_json::from_str(&text).expect("report parses"))
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("dekl_{}_{name}", std::process::id()))
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().map(|o| o.remove("timingMs"));
    v
}

#[test]
fn exit_status_matrix() {
    let cred = corpus("credential.dekl").display().to_string();
    let moni = corpus("monitoring.dekl").display().to_string();
    let ungu = corpus("unguarded.dekl").display().to_string();
    let perr = corpus("parse_error.dekl").display().to_string();
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["check", &cred], 0),
        (vec!["check", &cred, &moni], 0),
        (vec!["check", &ungu], 1),
        (vec!["check", &perr], 2),
        (vec!["check", "no_such_file.dekl"], 2),
        // worst status wins across files
        (vec!["check", &cred, &ungu, &perr], 2),
        (vec!["analyze", &cred], 0),
        (vec!["analyze", &cred, "--presheaf", "Auth"], 0),
        (vec!["analyze", &cred, "--presheaf", "Nope"], 1),
        (vec!["adequacy", &cred, "--max-len", "4"], 0),
        (vec!["corpus-run"], 0),
    ];
    for (args, expected) in cases {
        let out = dekl(&args);
        assert_eq!(
            out.status.code(),
            Some(expected),
            "args {args:?}: stdout {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn check_reports_error_position() {
    let perr = corpus("parse_error.dekl").display().to_string();
    let out = dekl(&["check", &perr]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("parse_error.dekl:1:11"), "{stdout}");
}

#[test]
fn no_ansi_when_disabled() {
    let out = dekl(&["corpus-run"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains('\u{1b}'), "ANSI escape leaked: {stdout:?}");
}

#[test]
fn adequacy_reports_path_count() {
    let cred = corpus("credential.dekl").display().to_string();
    let out = dekl(&["adequacy", &cred, "--max-len", "5"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("round-trip OK, 22 paths"), "{stdout}");
}

#[test]
fn json_reports_are_deterministic() {
    let cred = corpus("credential.dekl").display().to_string();
    for (name, args) in [
        ("analyze", vec!["analyze", cred.as_str()]),
        ("corpus", vec!["corpus-run"]),
        ("meta", vec!["meta", "--iters", "25"]),
    ] {
        let (p1, p2) = (tmp(&format!("{name}_a.json")), tmp(&format!("{name}_b.json")));
        let (_, r1) = dekl_json(&args, &p1);
        let (_, r2) = dekl_json(&args, &p2);
        let (a, b) = (strip_timing(r1), strip_timing(r2));
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "{name}"
        );
        let _ = std::fs::remove_file(p1);
        let _ = std::fs::remove_file(p2);
    }
}

#[test]
fn reports_match_golden_files() {
    let cred = corpus("credential.dekl").display().to_string();
    let moni = corpus("monitoring.dekl").display().to_string();
    let defs = corpus("defaults.dekl").display().to_string();
    let cases = [
        (vec!["analyze", cred.as_str()], "credential_analyze.json"),
        (vec!["analyze", moni.as_str()], "monitoring_analyze.json"),
        (vec!["analyze", defs.as_str()], "defaults_analyze.json"),
        (vec!["corpus-run"], "corpus_run.json"),
    ];
    for (args, golden_name) in cases {
        let path = tmp(golden_name);
        let (out, report) = dekl_json(&args, &path);
        assert_eq!(out.status.code(), Some(0), "{golden_name}");
        let expected: Value =
            serde_json::from_str(&std::fs::read_to_string(golden(golden_name)).unwrap()).unwrap();
        assert_eq!(strip_timing(report), expected, "{golden_name}");
        let _ = std::fs::remove_file(path);
    }
}

#[test]
fn corpus_run_prints_one_line_per_case() {
    let out = dekl(&["corpus-run"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("FAIL"), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 11);
}

#[test]
fn meta_small_run_passes() {
    let out = dekl(&["meta", "--iters", "30", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for suite in ["weakening", "substitution", "subject-reduction", "canonicity"] {
        assert!(stdout.contains(suite), "{stdout}");
    }
    assert!(stdout.contains("no closed inhabitant"), "{stdout}");
}

#[test]
fn analyze_depth_override_is_reported() {
    let path = tmp("depth.json");
    let moni = corpus("monitoring.dekl").display().to_string();
    let (_, report) = dekl_json(&["analyze", &moni, "--depth", "2"], &path);
    assert_eq!(report["items"][0]["depth"], 2);
    let _ = std::fs::remove_file(path);
}

#[test]
fn type_error_report_carries_kind_span_and_terms() {
    let src = "state S0. state S1.\ndef x : FinTrace(S0, S1) := nil(S0).\n";
    let bad = tmp("conv_failure.dekl");
    std::fs::write(&bad, src).unwrap();
    let json_path = tmp("conv_failure.json");
    let bad_str = bad.display().to_string();
    let (out, report) = dekl_json(&["check", &bad_str], &json_path);
    assert_eq!(out.status.code(), Some(1));
    let err = &report["items"][0]["errors"][0];
    assert_eq!(err["kind"], "ConversionFailure");
    assert_eq!(err["span"]["startLine"], 2);
    assert_eq!(err["expected"], "FinTrace(S0, S1)");
    assert_eq!(err["actual"], "FinTrace(S0, S0)");
    let _ = std::fs::remove_file(bad);
    let _ = std::fs::remove_file(json_path);
}
