use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tiltload"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("tiltload-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn trim_prints_equilibrium() {
    let out = bin().arg("trim").output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["q"].as_array().unwrap().len(), 10);
    assert!(v["residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn simulate_then_rmse() {
    let dir = scratch("sim");
    let gain = dir.join("gain.json");
    std::fs::write(&gain, tiltload::harness::DEFAULT_GAIN_JSON).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"duration": 0.6}"#).unwrap();
    let run = dir.join("run");
    let out = bin()
        .args(["simulate", "--estimator", "kf", "--seed", "4"])
        .arg("--config")
        .arg(&cfg)
        .arg("--gain")
        .arg(&gain)
        .arg("--out")
        .arg(&run)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["estimator"], "kf");
    assert_eq!(summary["ticks"], 51);
    assert_eq!(std::fs::read_to_string(run.join("sets.jsonl")).unwrap().lines().count(), 51);

    let out = bin().arg("rmse").arg(run.join("log.csv")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let x: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(x[0], "x");
    let tracking: f64 = x[1].parse().unwrap();
    assert!((tracking - summary["variables"]["x"]["tracking_rmse"].as_f64().unwrap()).abs() < 1e-12);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn bad_input_fails_cleanly() {
    let out = bin().args(["simulate", "--estimator", "ekf", "--out", "/tmp/x"]).output().unwrap();
    assert!(!out.status.success());
    let dir = scratch("bad");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"ts": 0.02}"#).unwrap();
    let out = bin().arg("trim").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("12 ms"));
    std::fs::remove_dir_all(dir).unwrap();
}
