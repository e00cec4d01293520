use std::process::{Command, Output};

use serde_json::Value;

fn treerep(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_treerep"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("TREEREP_THREADS", t),
        None => cmd.env_remove("TREEREP_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn invalid_q_is_a_config_error() {
    let out = treerep(&["verify", "--q", "1"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(treerep(&["verify", "--bogus"], None).status.code(), Some(2));
    assert_eq!(treerep(&["suite", "no_such_suite"], None).status.code(), Some(2));
    assert_eq!(treerep(&["--help"], None).status.code(), Some(0));
}

#[test]
fn default_verify_passes() {
    let out = treerep(&["verify", "--q", "2", "--depth", "8", "--dim", "2", "--seed", "42"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["tool"], "treerep");
    assert_eq!(v["command"], "verify");
    assert_eq!(v["passed"], true);
    assert!(v["timestamp"].is_string());
    let suites = v["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 7);
    for s in suites {
        assert_eq!(s["passed"], true);
        // The admissibility table has one trial per (r, d) row rather than random draws.
        if s["suite_name"] != "admissibility_table" {
            assert_eq!(s["trial_count"], 100);
        }
        assert_eq!(s["seed"], 42);
        assert!(s["max_residual"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn admissibility_csv_has_the_ball_of_radius_three() {
    let out = treerep(&["admissibility-table", "--q", "2", "--depth", "6", "--dim", "1", "--format", "csv"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,r,d,orbit_count,fixed_dim"));
    assert!(text.lines().any(|l| l == "2,3,1,12,12"), "{text}");
}

#[test]
fn csv_is_refused_for_suites() {
    let out = treerep(&["suite", "prop22", "--format", "csv"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_across_runs_and_thread_counts() {
    let args = ["verify", "--q", "3", "--depth", "6", "--trials", "12", "--seed", "7", "--no-timestamp"];
    let one = treerep(&args, Some("1"));
    let again = treerep(&args, Some("1"));
    let four = treerep(&args, Some("4"));
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, again.stdout);
    assert_eq!(one.stdout, four.stdout);
    assert!(json(&one).get("timestamp").is_none());
}

#[test]
fn bad_thread_count_is_a_config_error() {
    assert_eq!(treerep(&["spectrum"], Some("zero")).status.code(), Some(2));
    assert_eq!(treerep(&["spectrum"], Some("0")).status.code(), Some(2));
}

#[test]
fn out_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = treerep(
        &["suite", "measure-cocycle", "--trials", "5", "--pretty", "--out", path.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["suites"][0]["suite_name"], "measure_cocycle");
    assert_eq!(v["config"]["trials"], 5);

    let missing = dir.path().join("no/such/dir/report.json");
    let out = treerep(&["spectrum", "--out", missing.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn impossible_tolerance_fails_with_counterexamples() {
    let out = treerep(&["suite", "homomorphism", "--trials", "6", "--tol", "1e-300", "--no-timestamp"], None);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["passed"], false);
    assert!(!v["suites"][0]["failures"].as_array().unwrap().is_empty());
}

#[test]
fn replay_and_spectrum_report() {
    let out = treerep(&["replay-prop21", "--no-timestamp"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["replay"]["merged_measure"], "1/6");
    assert_eq!(v["replay"]["busemann_exponent"], -1);
    assert!(v["errors"].as_array().unwrap().is_empty());

    let out = treerep(&["spectrum", "--q", "3", "--dim", "3", "--no-timestamp"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert!(v["guard"]["sigma_min"].as_f64().unwrap() > 0.0);

    let text = treerep(&["suite", "prop22", "--trials", "4", "--format", "text"], None);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("PASS prop22")), "{text}");
}
