use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mspc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mspc-guard"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{"duration_h": 2.0, "onset_h": 1.0, "calibration_runs": 3, "seeds": [1, 2]}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = mspc(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("experiment"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mspc(dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = mspc(dir.path(), &["experiment", "--config", &cfg, "--scenario", "Z9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn empty_seed_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seeds": [], "duration_h": 2.0, "onset_h": 1.0, "calibration_runs": 3}"#).unwrap();
    let o = mspc(dir.path(), &["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"sedes": [1]}"#).unwrap();
    let o = mspc(dir.path(), &["calibrate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = mspc(dir.path(), &["run", "--config", &cfg, "--scenario", "A1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_run_diagnose_flow() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = small_config(dir.path());

    let o = mspc(&out, &["calibrate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let model = fs::read(out.join("model.json")).unwrap();
    let again = dir.path().join("again");
    assert_eq!(mspc(&again, &["calibrate", "--config", &cfg]).status.code(), Some(0));
    assert_eq!(fs::read(again.join("model.json")).unwrap(), model);

    let o = mspc(&out, &["run", "--config", &cfg, "--scenario", "A1", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["A1_seed2.csv", "A1_seed2.meta.json", "A1_seed2_stats.csv", "A1_seed2_alarms.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let log: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("A1_seed2_alarms.json")).unwrap()).unwrap();
    assert!(!log["alarms"].as_array().unwrap().is_empty());

    let run = out.join("A1_seed2.csv");
    let alarms = out.join("A1_seed2_alarms.json");
    let o = mspc(
        &out,
        &["diagnose", "--config", &cfg, "--run", run.to_str().unwrap(), "--alarms", alarms.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Attack"));
    assert!(out.join("A1_seed2_diagnosis.json").exists());
}

#[test]
fn experiment_with_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = small_config(dir.path());
    let o = mspc(&out, &["experiment", "--config", &cfg, "--scenario", "A2", "--seed", "3", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("2 runs"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("A2_experiment.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = report["seeds"].as_array().unwrap().iter().map(|s| s["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![3, 4]);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_mspc-guard"))
        .env("MSPC_GUARD_OUT", dir.path().join("env_out"))
        .args(["calibrate", "--config", &cfg])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env_out/model.json").exists());
}
