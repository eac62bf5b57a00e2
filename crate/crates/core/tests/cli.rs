use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spec(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name).display().to_string()
}

fn seqpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqpt")).args(args).output().unwrap()
}

fn report(args: &[&str]) -> Value {
    let out = seqpt(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> (i32, Value) {
    let out = seqpt(args);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap_or(Value::Null);
    (out.status.code().unwrap(), err)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn identity_diag_exact_is_one() {
    let r = report(&["estimate-diag", "--channel", &spec("identity_2q.json"), "--m", "II", "--M", "100", "--mode", "exact"]);
    assert_eq!(r["rows"][0]["value_re"], 1.0);
    assert_eq!(r["rows"][0]["M"], 100);
    assert_eq!(r["rows"][0]["protocol"], "diagonal");
}

#[test]
fn depolarizing_diag_matches_oracle_row() {
    let r = report(&["estimate-diag", "--channel", &spec("depolarizing_1q.json"), "--m", "Z", "--M", "100000", "--seed", "7"]);
    let row = &r["rows"][0];
    assert!((row["oracle_re"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!(row["z_score"].as_f64().unwrap().abs() < 5.0);
    assert_eq!(r["manifest"]["command"], "estimate-diag");
    assert_eq!(r["manifest"]["channel_sha256"].as_str().unwrap().len(), 64);
    assert!(r["manifest"]["timestamp"].is_string());
}

#[test]
fn bad_label_exits_3() {
    let (code, err) = exit_code(&["estimate-diag", "--channel", &spec("identity_2q.json"), "--m", "Q", "--M", "100"]);
    assert_eq!(code, 3);
    assert_eq!(err["error"], "invalid_label");
    let (code, _) = exit_code(&["estimate-diag", "--channel", &spec("identity_2q.json"), "--m", "XXX", "--M", "100"]);
    assert_eq!(code, 3);
}

#[test]
fn malformed_and_oversized_specs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"n\": 1, \"kind\": \"depolarizing\"}");
    let (code, err) = exit_code(&["estimate-diag", "--channel", bad.to_str().unwrap(), "--m", "Z", "--M", "10"]);
    assert_eq!(code, 2);
    assert!(err["message"].is_string());
    let missing = dir.path().join("missing.json");
    assert_eq!(exit_code(&["estimate-diag", "--channel", missing.to_str().unwrap(), "--m", "Z", "--M", "10"]).0, 2);
    let big = write(dir.path(), "big.json", "{\"n\": 7, \"kind\": \"identity\"}");
    assert_eq!(exit_code(&["estimate-diag", "--channel", big.to_str().unwrap(), "--m", "IIIIIII", "--M", "10"]).0, 4);
}

#[test]
fn identity_offdiag_enumerated_is_zero() {
    let r = report(&[
        "estimate-offdiag", "--channel", &spec("identity_2q.json"), "--m", "II", "--n-label", "XI", "--M", "1", "--mode", "enumerate",
    ]);
    let row = &r["rows"][0];
    assert_eq!(row["value_re"], 0.0);
    assert_eq!(row["value_im"], 0.0);
    assert_eq!(row["n_label"], "XI");
    assert_eq!(row["z_score"], 0.0);
}

#[test]
fn rotation_offdiag_imaginary_part() {
    let r = report(&["estimate-offdiag", "--channel", &spec("rotation_x_1q.json"), "--m", "I", "--n-label", "X", "--M", "100000", "--seed", "2"]);
    let row = &r["rows"][0];
    let im = row["value_im"].as_f64().unwrap();
    assert!((im - 0.5).abs() < 5.0 * row["std_error_im"].as_f64().unwrap());
    assert!(row["value_re"].as_f64().unwrap().abs() < 5.0 * row["std_error_re"].as_f64().unwrap());
    assert!(row["z_score"].as_f64().unwrap().is_finite());
}

#[test]
fn equal_labels_match_diagonal_protocol() {
    let ch = spec("damped_rotation_2q.json");
    let off = report(&["estimate-offdiag", "--channel", &ch, "--m", "YI", "--n-label", "YI", "--M", "50000", "--seed", "4"]);
    let diag = report(&["estimate-diag", "--channel", &ch, "--m", "YI", "--M", "50000", "--seed", "5"]);
    let (a, b) = (&off["rows"][0], &diag["rows"][0]);
    let sigma = (a["std_error"].as_f64().unwrap().powi(2) + b["std_error"].as_f64().unwrap().powi(2)).sqrt();
    assert!((a["value_re"].as_f64().unwrap() - b["value_re"].as_f64().unwrap()).abs() < 5.0 * sigma);
}

#[test]
fn epsilon_derives_experiment_count() {
    let r = report(&["estimate-offdiag", "--channel", &spec("rotation_x_1q.json"), "--m", "I", "--n-label", "X", "--epsilon", "0.1"]);
    assert_eq!(r["rows"][0]["M"], 100);
    let r = report(&["estimate-diag", "--channel", &spec("rotation_x_1q.json"), "--m", "X", "--epsilon", "0.1"]);
    assert_eq!(r["rows"][0]["M"], 25);
    assert_ne!(seqpt(&["estimate-diag", "--channel", &spec("rotation_x_1q.json"), "--m", "X"]).status.code(), Some(0));
}

#[test]
fn triplet_log_and_follow_ups() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("id.log");
    let out = seqpt(&["triplets", "--channel", &spec("identity_2q.json"), "--M", "10", "--out", log.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# seqpt-triplets v1 n=2 seed=0 M=10 channel="));
    assert_eq!(lines.len(), 11);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 3);
        assert_eq!(f[1], f[2]);
    }

    let mix = dir.path().join("mix.log");
    let mixture = spec("mixture_4q.json");
    assert!(seqpt(&["triplets", "--channel", &mixture, "--M", "2000", "--seed", "1", "--out", mix.to_str().unwrap()]).status.success());
    let r = report(&["sieve", "--log", mix.to_str().unwrap(), "--threshold", "0.08", "--channel", &mixture]);
    let labels: Vec<&str> = r["rows"].as_array().unwrap().iter().map(|row| row["m"].as_str().unwrap()).collect();
    assert_eq!(labels, ["IIII", "XIII", "ZZII"]);
    let values: Vec<f64> = r["rows"].as_array().unwrap().iter().map(|row| row["value_re"].as_f64().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    assert!(r["details"]["pairs_processed"].as_u64().unwrap() <= 2000 * 2001 / 2);
    for row in r["rows"].as_array().unwrap() {
        assert!(row["z_score"].as_f64().unwrap().abs() < 5.0);
    }

    let r = report(&["diag-from-log", "--log", mix.to_str().unwrap(), "--m", "XIII", "--m", "YYYY"]);
    assert_eq!(r["rows"].as_array().unwrap().len(), 2);
    assert_eq!(r["rows"][0]["protocol"], "triplet");
    assert!(r["rows"][0]["oracle_re"].is_null());

    let (code, err) = exit_code(&["sieve", "--log", mix.to_str().unwrap(), "--threshold", "0.08", "--channel", &spec("identity_2q.json")]);
    assert_eq!(code, 5);
    assert_eq!(err["error"], "hash_mismatch");

    let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    let bad = write(dir.path(), "trunc.log", &truncated);
    assert_eq!(exit_code(&["diag-from-log", "--log", bad.to_str().unwrap(), "--m", "II"]).0, 2);
    assert_eq!(exit_code(&["diag-from-log", "--log", log.to_str().unwrap(), "--m", "Q"]).0, 3);
}

#[test]
fn single_base_log_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let hash = "0".repeat(64);
    let text = format!("# seqpt-triplets v1 n=1 seed=0 M=3 channel={hash}\n2\t0\t1\n2\t1\t1\n2\t0\t0\n");
    let log = write(dir.path(), "one.log", &text);
    let (code, err) = exit_code(&["sieve", "--log", log.to_str().unwrap(), "--threshold", "0.1"]);
    assert_eq!(code, 6);
    assert_eq!(err["error"], "single_base_log");
}

#[test]
fn verify_levels_and_caps() {
    let start = std::time::Instant::now();
    let out = seqpt(&["verify", "--n", "1"]);
    assert!(out.status.success());
    assert!(start.elapsed().as_secs_f64() < 1.0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("two_design_average") && table.contains("PASS"));

    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("v.json");
    let out = seqpt(&["verify", "--n", "2", "--verify-level", "full", "--out", summary.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["summary"]["passed"], true);
    assert!(v["summary"]["residuals"].as_array().unwrap().iter().any(|r| r["identity"] == "trace_condition"));

    assert_eq!(exit_code(&["verify", "--n", "7", "--verify-level", "full"]).0, 4);
    assert_eq!(exit_code(&["verify", "--n", "1", "--verify-level", "nope"]).0, 2);
}
