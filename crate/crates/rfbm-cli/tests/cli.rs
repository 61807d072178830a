//! CLI behavior: exit codes, output formats, config merging.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rfbm"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rfbm-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn constants_emits_expected_json() {
    let out = bin()
        .args(["constants", "--hurst", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["A"].as_f64().unwrap(), 2.0);
    assert_eq!(v["tau0"].as_f64().unwrap(), 1.0);
    assert_eq!(v["B"].as_f64().unwrap(), 0.5);
    assert_eq!(v["lambda"].as_f64().unwrap(), 1.0);
}

#[test]
fn unknown_flag_exits_2_without_outputs() {
    let dir = temp_dir("usage");
    let stem = dir.join("nothing");
    let out = bin()
        .args(["constants", "--hurst", "0.5", "--bogus-flag"])
        .args(["--out", stem.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!stem.with_extension("json").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn domain_error_exits_1() {
    let out = bin()
        .args(["constants", "--hurst", "1.7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("Hurst"), "stderr: {msg}");
}

#[test]
fn missing_required_parameter_exits_2() {
    let out = bin().args(["constants"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("hurst"), "stderr: {msg}");
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let dir = temp_dir("config");
    let cfg = dir.join("cfg.json");
    fs::write(
        &cfg,
        r#"{"hurst": 0.5, "p": -0.5, "t_max": 1e6, "pickands": 1.0}"#,
    )
    .unwrap();
    let out = bin()
        .args(["criterion", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["classification"], "Finite");
    // flag overrides the config value of p
    let out = bin()
        .args(["criterion", "--config", cfg.to_str().unwrap(), "--p", "2.0"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["classification"], "Infinite");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn sample_fbm_writes_csv_and_manifest() {
    let dir = temp_dir("sample");
    let stem = dir.join("path");
    let out = bin()
        .args([
            "sample-fbm",
            "--hurst",
            "0.7",
            "--n",
            "32",
            "--dt",
            "0.5",
            "--seed",
            "9",
        ])
        .args(["--out", stem.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.starts_with("t,value\n"));
    assert_eq!(csv.lines().count(), 33);
    let man: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("path.manifest.json")).unwrap()).unwrap();
    assert_eq!(man["command"], "sample-fbm");
    assert_eq!(man["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(man["seed"].as_u64().unwrap(), 9);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn dense_oracle_size_guard_maps_to_exit_1() {
    let out = bin()
        .args([
            "sample-fbm",
            "--hurst",
            "0.5",
            "--n",
            "4096",
            "--method",
            "dense",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dense-oracle limit"));
}

#[test]
fn queue_sim_modes_run() {
    for mode in ["reflected", "stationary"] {
        let out = bin()
            .args([
                "queue-sim",
                "--hurst",
                "0.5",
                "--horizon",
                "20",
                "--dt",
                "0.1",
                "--seed",
                "3",
                "--mode",
                mode,
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "mode {mode}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["mode"], mode);
        assert!(v["max_value"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn queue_sim_fixed_window_runs() {
    let out = bin()
        .args([
            "queue-sim",
            "--hurst",
            "0.6",
            "--horizon",
            "10",
            "--dt",
            "0.1",
            "--seed",
            "3",
            "--mode",
            "stationary",
            "--window",
            "5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn pickands_fixed_theta_output_shape() {
    let out = bin()
        .args([
            "pickands", "--hurst", "0.5", "--theta", "0.4", "--theta", "0.2", "--span", "6",
            "--reps", "2000", "--seed", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let est = v["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 2);
    assert!(est.iter().all(|e| e["value"].as_f64().unwrap() > 0.0));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    // parallel reductions use a fixed chunk layout, so worker count must
    // not change any digit
    let args = [
        "pickands", "--hurst", "0.5", "--reps", "8000", "--seed", "6",
    ];
    let one = bin().env("RFBM_THREADS", "1").args(args).output().unwrap();
    let two = bin().env("RFBM_THREADS", "2").args(args).output().unwrap();
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);

    let args = [
        "tail-prob",
        "--hurst",
        "0.5",
        "--interval-t",
        "1",
        "--level",
        "1",
        "--dt",
        "0.1",
        "--reps",
        "2000",
        "--seed",
        "8",
    ];
    let one = bin().env("RFBM_THREADS", "1").args(args).output().unwrap();
    let two = bin().env("RFBM_THREADS", "2").args(args).output().unwrap();
    assert_eq!(one.stdout, two.stdout);
}
