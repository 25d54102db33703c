use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lgdelay_cli::presets;
use serde_json::Value;

fn lgdelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgdelay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(extra_model: &str, h: f64, analyses: &str) -> String {
    format!(
        r#"{{
            "model": {{"a1": "1 + 0.2*cos(t)", "a2": 1, "b": 1, "c1": 0.5, {extra_model} "k1": 1, "k2": 1,
                      "tau1": 0.5, "tau2": 0.5, "sigma1": 0.5, "sigma2": 0.5}},
            "history": {{"phi1": 0.5, "phi2": 0.5}},
            "run": {{"t_end": 20, "h": {h}, "t_settle": 10}},
            "analyses": {analyses},
            "options": {{"horizons": {{"bounds": 50, "bounds_samples": 5000, "liminf": 40, "liminf_samples": 200}}}}
        }}"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn report_without_timestamp(dir: &Path) -> Value {
    let mut v: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut()
        .unwrap()
        .remove("timestamp_unix")
        .expect("timestamp present");
    v
}

#[test]
fn missing_coefficient_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &small_config("", 0.01, r#"{"bounds": true}"#),
    );
    let out = lgdelay(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("model.c2"), "{stderr}");
}

#[test]
fn step_larger_than_delay_is_rejected_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &small_config(r#""c2": 1,"#, 1.0, r#"{"bounds": true}"#),
    );
    let out = lgdelay(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("exceeds the smallest delay") && stderr.contains("choose h <="),
        "{stderr}"
    );
}

#[test]
fn empty_selection_has_nothing_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &small_config(r#""c2": 1,"#, 0.01, "{}"),
    );
    let out = lgdelay(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to report"));
}

#[test]
fn unknown_key_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(r#""c2": 1,"#, 0.01, r#"{"bounds": true, "plots": true}"#);
    let cfg = write(dir.path(), "c.json", &text);
    let out = lgdelay(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/analyses") && stderr.contains("plots"),
        "{stderr}"
    );
}

#[test]
fn bounds_subcommand_reports_only_permanence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &small_config(r#""c2": 1,"#, 0.01, r#"{"pap": true}"#),
    );
    let out = lgdelay(&[
        "bounds",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = report_without_timestamp(dir.path());
    assert!(
        report["permanence"]["by_source"]["estimated"]["empirical"]["all_pass"]
            .as_bool()
            .unwrap()
    );
    assert_eq!(report["permanence"]["source"], "estimated");
    for section in ["stability", "pap", "fixed_point", "discrepancies"] {
        assert!(report[section].is_null(), "{section}");
    }
    let csv = fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("t,u,v\n"));
    assert_eq!(csv.lines().count(), 2002);
    let plot = fs::read_to_string(dir.path().join("plot.gp")).unwrap();
    assert!(plot.contains("'trajectories.csv'"));
}

#[test]
fn stability_subcommand_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &small_config(r#""c2": 1,"#, 0.01, r#"{"bounds": true}"#),
    );
    let out = lgdelay(&[
        "stability",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--h",
        "0.02",
        "--t-end",
        "30",
        "--beta-denominator",
        "M2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = report_without_timestamp(dir.path());
    assert_eq!(report["model"]["run"]["h"], 0.02);
    assert_eq!(report["model"]["run"]["t_end"], 30.0);
    assert_eq!(report["stability"]["beta_denominator"], "M2");
    assert!(
        report["stability"]["attractivity"]["final_distance"]
            .as_f64()
            .unwrap()
            < 1e-3
    );
    let curve = fs::read_to_string(dir.path().join("attractivity.csv")).unwrap();
    assert!(curve.starts_with("t,distance\n"));
}

#[test]
fn simulate_with_random_histories() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgdelay(&[
        "simulate",
        "--preset",
        "example2",
        "--t-end",
        "20",
        "--random",
        "4",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("4/4 stay positive"), "{stdout}");
    assert!(dir.path().join("trajectories.csv").exists());
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_preset_is_a_validation_error() {
    let out = lgdelay(&["preset", "example9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serialized_preset_matches_preset_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = write(dir.path(), "example2.json", &presets::example2().to_json());
    let run = lgdelay(&["run", &cfg, "--out", a.to_str().unwrap()]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let preset = lgdelay(&["preset", "example2", "--out", b.to_str().unwrap()]);
    assert!(preset.status.success());
    assert_eq!(
        serde_json::to_string(&report_without_timestamp(&a)).unwrap(),
        serde_json::to_string(&report_without_timestamp(&b)).unwrap()
    );
    let report = report_without_timestamp(&a);
    assert!((report["permanence"]["m1"].as_f64().unwrap() - 0.5567).abs() < 1e-3);
}
