use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn eulerctl(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eulerctl"))
        .args(args)
        .env("EULERCTL_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_SWEEP: &str = r#"{
  "seed": 3,
  "output": "sweep",
  "experiment": { "kind": "saturation-sweep", "radius": 2, "split_samples": 1 }
}"#;

#[test]
fn version_prints_package_version() {
    let tmp = TempDir::new().unwrap();
    let out = eulerctl(&["version"], tmp.path());
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        format!("eulerctl {}", env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn run_writes_tables_and_summary_under_output_root() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_SWEEP);
    let out = eulerctl(&["run", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("sweep");
    for f in ["sweep.csv", "basis.csv", "doubling.csv", "summary.json", "config.json"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["prng"], "ChaCha8");
    assert_eq!(summary["config_digest"].as_str().unwrap().len(), 64);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] C2"), "{stdout}");
}

#[test]
fn explicit_output_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_SWEEP);
    let out = eulerctl(&["run", &cfg, "--output", "elsewhere"], tmp.path());
    assert!(out.status.success());
    assert!(tmp.path().join("elsewhere/summary.json").exists());
    assert!(!tmp.path().join("sweep").exists());
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let tmp = TempDir::new().unwrap();
    for body in [
        "{ not json",
        r#"{ "output": "x", "experiment": { "kind": "saturation-sweep", "radius": 2, "bogus": 1 } }"#,
        r#"{ "output": "x", "experiment": { "kind": "saturation-sweep", "radius": 9 } }"#,
        r#"{ "output": "x", "experiment": { "kind": "saturation-sweep", "radius": 4, "resolution": 3 } }"#,
        r#"{ "output": "x", "experiment": { "kind": "no-such-kind" } }"#,
    ] {
        let cfg = write(tmp.path(), "bad.json", body);
        let out = eulerctl(&["run", &cfg], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(!tmp.path().join("x").exists(), "{body}");
    }
    let out = eulerctl(&["run", "/nonexistent/config.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mass_incompatible_problem_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{
      "output": "x",
      "experiment": {
        "kind": "steering-sweep",
        "problem": {
          "resolution": 2, "horizon": 1.0,
          "pressure": { "law": "isothermal", "c2": 1.0 },
          "u0": [], "u_target": [],
          "g0": [{ "kind": "cos", "m": [0, 0, 0], "amp": 0.1 }],
          "g_target": [{ "kind": "cos", "m": [0, 0, 0], "amp": 0.3 }]
        },
        "params": { "mu": 0.1, "level": 1, "oscillations": 1, "delta": 0.0625, "subdivisions": 4, "dt": 0.0625 },
        "mus": [0.1]
      }
    }"#;
    let cfg = write(tmp.path(), "c.json", body);
    let out = eulerctl(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn computation_failure_exits_1_with_only_error_record() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{
      "output": "x",
      "experiment": {
        "kind": "solver-convergence",
        "resolution": 4,
        "pressure": { "law": "gamma", "a": 1.0, "gamma": 1.4 },
        "horizon": 0.5, "dts": [0.25, 0.125],
        "mass_run": {
          "u0": [{ "kind": "sin", "component": 0, "m": [1, 0, 0], "amp": 40.0 }],
          "g0": [{ "kind": "cos", "m": [1, 0, 0], "amp": 2.0 }],
          "horizon": 4.0, "dt": 0.5
        }
      }
    }"#;
    let cfg = write(tmp.path(), "c.json", body);
    let out = eulerctl(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<String> = fs::read_dir(tmp.path().join("x"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(entries, vec!["error.json".to_string()]);
}

#[test]
fn report_reads_runs_and_checks_determinism() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_SWEEP);
    assert!(eulerctl(&["run", &cfg, "-o", "a"], tmp.path()).status.success());
    assert!(eulerctl(&["run", &cfg, "-o", "b"], tmp.path()).status.success());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let long = tmp.path().join("long.csv");
    let out = eulerctl(
        &["report", a.to_str().unwrap(), b.to_str().unwrap(), "--csv", long.to_str().unwrap()],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] C12"), "{stdout}");
    let csv = fs::read_to_string(long).unwrap();
    assert!(csv.starts_with("run,experiment,metric,value"));
    assert!(csv.contains("gram_rank"));
}

#[test]
fn report_usage_and_artifact_errors() {
    let tmp = TempDir::new().unwrap();
    let out = eulerctl(&["report"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = eulerctl(&["report", tmp.path().join("empty").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    fs::write(tmp.path().join("empty/summary.json"), "{}").unwrap();
    let out = eulerctl(&["report", tmp.path().join("empty").to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decompose_prints_a_tree() {
    let tmp = TempDir::new().unwrap();
    let out = eulerctl(&["decompose", "sin", "3", "2", "-1", "1"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tree: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(tree["root"]["kind"], "sin");
    assert_eq!(tree["root"]["i"], 3);
    assert_eq!(eulerctl(&["decompose", "cos", "4", "1", "0", "0"], tmp.path()).status.code(), Some(2));
    assert_eq!(eulerctl(&["decompose", "cos", "1", "0", "0", "0"], tmp.path()).status.code(), Some(2));
}
