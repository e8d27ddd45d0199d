use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn holosense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holosense"))
        .args(args)
        .env_remove("HOLOSENSE_LOG")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_ok(kind: &str, cfg: &str, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![kind, "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = holosense(&args);
    assert!(o.status.success(), "{kind} failed: {}", String::from_utf8_lossy(&o.stderr));
    let manifest = String::from_utf8(o.stdout).unwrap();
    serde_json::from_str(&fs::read_to_string(manifest.trim()).unwrap()).unwrap()
}

const SMALL: &str = r#"{"noise": {"snr_db": [5, 20], "trials": 12, "seed": 7}}"#;

#[test]
fn identical_inputs_give_identical_csv_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("nmse-snr", &cfg, &a, &["--jobs", "1"]);
    run_ok("nmse-snr", &cfg, &b, &["--jobs", "3"]);
    for f in ["nmse-snr_results.csv", "nmse-snr_trials.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ma = run_ok("nmse-snr", &cfg, &a, &[]);
    let mb = run_ok("nmse-snr", &cfg, &b, &["--seed", "8"]);
    assert_eq!(ma["seed"], 7);
    assert_eq!(mb["seed"], 8);
    assert_eq!(mb["config"]["noise"]["seed"], 8);
    assert_ne!(
        fs::read(a.join("nmse-snr_trials.csv")).unwrap(),
        fs::read(b.join("nmse-snr_trials.csv")).unwrap()
    );
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("o");
    let m = run_ok("psis-demo", &cfg, &out, &[]);
    let files = m["files"].as_array().unwrap();
    let mut listed: Vec<String> = files.iter().map(|f| f["path"].as_str().unwrap().to_string()).collect();
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| !n.ends_with("_manifest.json"))
        .collect();
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert!(m["version"].as_str().unwrap().starts_with('v'));
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["experiment"], "psis-demo");
}

#[test]
fn csv_format_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("o");
    run_ok("nmse-snr", &cfg, &out, &[]);
    let text = fs::read_to_string(out.join("nmse-snr_results.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "config_id,series,n_v,n_h,n_t,snr_db,est_order,trials,failures,nmse_db"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..5], ["0", "psis", "16", "16", "256"]);
    assert_eq!(row[5], "5.00000000000e0");
    let mantissa = row[9].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 12);
    let trials = fs::read_to_string(out.join("nmse-snr_trials.csv")).unwrap();
    assert_eq!(trials.lines().next().unwrap(), "config_id,n_t,snr_db,trial,nmse_db");
    assert_eq!(trials.lines().count(), 1 + 2 * 12);
}

#[test]
fn raw_pattern_manifest_carries_the_three_lobes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"pattern": {"step_deg": 2}}"#);
    let out = dir.path().join("o");
    let m = run_ok("pattern-raw", &cfg, &out, &[]);
    let peaks: Vec<(f64, f64)> = m["peaks"]
        .as_array()
        .unwrap()
        .iter()
        .take(3)
        .map(|p| (p["theta_deg"].as_f64().unwrap(), p["phi_deg"].as_f64().unwrap()))
        .collect();
    for lobe in [(70.0, 40.0), (110.0, -40.0), (90.0, 0.0)] {
        assert!(peaks.contains(&lobe), "{lobe:?} not in {peaks:?}");
    }
    let grid = fs::read_to_string(out.join("pattern-raw_pattern.csv")).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "theta_deg,phi_deg,gain_db");
    assert_eq!(grid.lines().count(), 1 + 91 * 91);
}

#[test]
fn psis_pattern_has_one_main_lobe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", "{}");
    let m = run_ok("pattern-psis", &cfg, &dir.path().join("o"), &[]);
    let peaks = m["peaks"].as_array().unwrap();
    assert_eq!(peaks[0]["theta_deg"], 70.0);
    assert_eq!(peaks[0]["phi_deg"], 40.0);
    assert!(peaks[1]["gain_db"].as_f64().unwrap() < -10.0);
}

#[test]
fn bounds_rows_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"bounds": {"draws": 20, "lemma2_k": [16]}}"#);
    let out = dir.path().join("o");
    let m = run_ok("bounds", &cfg, &out, &[]);
    let text = fs::read_to_string(out.join("bounds_results.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "bound_name,instance_id,measured,bound,holds");
    assert_eq!(text.lines().count(), 1 + 20 * 2 + 20 + 20);
    for s in m["summary"].as_array().unwrap() {
        assert_eq!(s["violations"], 0, "{s}");
    }
}

#[test]
fn order_and_size_sweeps_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"noise": {"snr_db": [null], "trials": 2}, "sweep": {"sizes": [16, 64], "orders": [3, 7]}}"#,
    );
    let m = run_ok("nmse-order", &cfg, &dir.path().join("o"), &[]);
    let s = m["summary"].as_array().unwrap();
    assert_eq!(s.len(), 2);
    assert!(s.iter().all(|p| p["nmse_db"].as_f64().unwrap() < -150.0));
    let m = run_ok("nmse-size", &cfg, &dir.path().join("o"), &[]);
    let n_t: Vec<u64> = m["summary"].as_array().unwrap().iter().map(|p| p["n_t"].as_u64().unwrap()).collect();
    assert_eq!(n_t, [16, 64]);
}

#[test]
fn syntax_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\n  \"noise\": {\"trials\": 3,,}\n}");
    let o = holosense(&["nmse-snr", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column"), "{err}");
}

#[test]
fn invalid_fields_are_reported_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"geometry": {"spacing_wl": 0}, "noise": {"trials": 0}, "pmcs": {"n_users": 3}}"#,
    );
    let o = holosense(&["nmse-snr", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for field in ["geometry.spacing_wl", "noise.trials", "pmcs.n_users"] {
        assert!(err.contains(field), "{field} missing in {err}");
    }
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".csv")));
}

#[test]
fn experiment_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"experiment": "bounds"}"#);
    let o = holosense(&["nmse-snr", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment:"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = holosense(&["bounds", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn model_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // spacing above half a wavelength aliases and is refused by the estimator
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"geometry": {"spacing_wl": 0.8}, "noise": {"snr_db": [10], "trials": 2}, "sweep": {"orders": [5]}}"#,
    );
    let o = holosense(&["nmse-order", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nmse-order failed"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(holosense(&["nmse-snr"]).status.code(), Some(2));
    assert_eq!(holosense(&["teleport", "--config", "x"]).status.code(), Some(2));
    assert_eq!(holosense(&["bounds", "--config", "x", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn log_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"bounds": {"draws": 5, "lemma2_k": [16]}}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_holosense"))
        .args(["bounds", "--config", &cfg, "--out", dir.path().to_str().unwrap()])
        .env("HOLOSENSE_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("INFO"));
    let quiet = holosense(&["bounds", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!String::from_utf8_lossy(&quiet.stderr).contains("INFO"));
}
