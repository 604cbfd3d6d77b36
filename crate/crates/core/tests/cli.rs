use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn depscore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depscore"))
        .args(args)
        .current_dir(dir)
        .env_clear()
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SNAPSHOTS: &str = r#"[
 {"dependency_name":"lodash","package_manager":"npm","previous_version":"4.17.19","updated_version":"4.17.21","candidate_updates":12,"successful_updates":11},
 {"dependency_name":"lodash","package_manager":"npm","previous_version":"4.17.20","updated_version":"4.17.21","candidate_updates":3,"successful_updates":3},
 {"dependency_name":"lodash","package_manager":"npm","previous_version":"3.10.1","updated_version":"4.17.21","candidate_updates":10,"successful_updates":4}
]"#;

const EVENTS: &str = r#"{"client":"a","ecosystem":"npm","provider":"lodash","origin_version":"4.17.19","target_version":"4.17.21","opened_at":"2022-01-01T00:00:00Z","closed_at":"2022-01-01T01:00:00Z","merged":true,"merged_by_human":true,"base_ci_passing":true,"checks":[{"name":"build","conclusion":"success"},{"name":"WIP","conclusion":"success"}]}
{"client":"b","ecosystem":"npm","provider":"lodash","origin_version":"4.17.19","target_version":"4.17.21","opened_at":"2022-01-02T00:00:00Z","closed_at":null,"merged":false,"merged_by_human":null,"base_ci_passing":true,"checks":[{"name":"test","conclusion":"failure"}]}
"#;

fn fixture() -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let snaps = dir.path().join("snapshots.json");
    let events = dir.path().join("events.ndjson");
    std::fs::write(&snaps, SNAPSHOTS).unwrap();
    std::fs::write(&events, EVENTS).unwrap();
    (dir, snaps, events)
}

#[test]
fn score_known_tuple_prints_badge_and_interval() {
    let (dir, ..) = fixture();
    let o = depscore(
        dir.path(),
        &["score", "--snapshots", "snapshots.json", "--provider", "lodash", "--origin", "4.17.19", "--target", "4.17.21"],
    );
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(stdout(&o), "compatibility: 92% (n=12) 90% CI [0.77, 1.00] badge=shown\n");
}

#[test]
fn score_small_tuple_is_unknown() {
    let (dir, ..) = fixture();
    let o = depscore(
        dir.path(),
        &["score", "--snapshots", "snapshots.json", "--provider", "lodash", "--origin", "4.17.20", "--target", "4.17.21"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o),
        "compatibility: unknown (candidates=3, successes=3) badge=unknown\n"
    );
}

#[test]
fn score_range_levels() {
    let (dir, ..) = fixture();
    let run = |level: &str| {
        let o = depscore(
            dir.path(),
            &["score", "--snapshots", "snapshots.json", "--provider", "lodash", "--target", "4.17.21", "--level", level, "--json"],
        );
        assert_eq!(code(&o), 0, "{o:?}");
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        (v["candidate_updates"].as_u64().unwrap(), v["successful_updates"].as_u64().unwrap())
    };
    assert_eq!(run("patch"), (15, 14));
    assert_eq!(run("minor"), (15, 14));
    assert_eq!(run("major"), (25, 18));
}

#[test]
fn flags_override_environment() {
    let (dir, ..) = fixture();
    let base = ["score", "--snapshots", "snapshots.json", "--provider", "lodash", "--target", "4.17.21", "--json"];
    let with_env = |extra: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_depscore"))
            .args(base.iter().chain(extra))
            .current_dir(dir.path())
            .env_clear()
            .env("DEPSCORE_LEVEL", "major")
            .output()
            .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["level"].as_str().unwrap().to_string()
    };
    assert_eq!(with_env(&[]), "major");
    assert_eq!(with_env(&["--level", "patch"]), "patch");
}

#[test]
fn unknown_tuple_is_a_domain_error() {
    let (dir, ..) = fixture();
    let o = depscore(
        dir.path(),
        &["score", "--snapshots", "snapshots.json", "--provider", "lodash", "--origin", "1.0.0", "--target", "4.17.21"],
    );
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown tuple"));
}

#[test]
fn missing_input_and_bad_flags_exit_one() {
    let (dir, ..) = fixture();
    let o = depscore(dir.path(), &["score", "--events", "nope.ndjson", "--provider", "x", "--target", "1.0.0"]);
    assert_eq!(code(&o), 1);
    let o = depscore(dir.path(), &["report", "--events", "events.ndjson", "--report", "pipeline", "--frobnicate"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn ingest_check_reports_rejections() {
    let (dir, _, events) = fixture();
    let mut text = std::fs::read_to_string(&events).unwrap();
    text.push_str("{\"client\":\"c\"}\n");
    std::fs::write(&events, text).unwrap();
    let o = depscore(dir.path(), &["ingest-check", "--events", "events.ndjson"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("loaded 2/3 records, 1 rejected\n  line 3: "));
    let o = depscore(dir.path(), &["ingest-check", "--events", "events.ndjson", "--strict"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn classify_checks_by_name_and_table() {
    let (dir, ..) = fixture();
    let o = depscore(dir.path(), &["classify-checks", "--name", "eslint", "--name", "GitGuardian Security Checks"]);
    assert_eq!(stdout(&o), "eslint\tLint\nGitGuardian Security Checks\tSecurity Analysis\n");
    let o = depscore(dir.path(), &["classify-checks", "--events", "events.ndjson"]);
    let out = stdout(&o);
    assert!(out.contains("Build                      1     33.3%"), "{out}");
    assert!(out.ends_with("total                      3\n"));
}

#[test]
fn reports_write_files_and_print_the_path() {
    let (dir, ..) = fixture();
    let o = depscore(
        dir.path(),
        &["report", "--snapshots", "snapshots.json", "--report", "candidates", "--output", "cand.csv"],
    );
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(stdout(&o), "cand.csv\n");
    let text = std::fs::read_to_string(dir.path().join("cand.csv")).unwrap();
    assert!(text.lines().any(|l| l == format!("share_at_least_5,{}", 2.0 / 3.0)));

    let o = depscore(dir.path(), &["report", "--events", "events.ndjson", "--report", "pipeline"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("share_useless_only,0\n"));
}

#[test]
fn precision_report_without_qualifying_keys_exits_two() {
    let (dir, ..) = fixture();
    let o = depscore(dir.path(), &["report", "--events", "events.ndjson", "--report", "precision"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn experiment_with_empty_feature_list_exits_two() {
    let (dir, ..) = fixture();
    std::fs::write(dir.path().join("spec.json"), r#"{"name":"empty","features":[]}"#).unwrap();
    let o = depscore(dir.path(), &["experiment", "--events", "events.ndjson", "--spec", "spec.json"]);
    assert_eq!(code(&o), 2);
    let o = depscore(dir.path(), &["experiment", "--events", "events.ndjson", "--spec", "history"]);
    assert_eq!(code(&o), 2, "under-populated filter");
}

#[test]
fn generate_then_experiment_writes_a_result_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = depscore(dir.path(), &["generate", "--output-dir", "eco", "--seed", "5"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let o = depscore(
        dir.path(),
        &["experiment", "--events", "eco/events.ndjson", "--spec", "baseline", "--iterations", "5", "--output", "r.json"],
    );
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(stdout(&o).starts_with("median AUC "));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["experiment_name"], "baseline");
    assert_eq!(v["auc_values"].as_array().unwrap().len(), 5);
    assert!(v["importances"]["exact_score"].is_array());
}
