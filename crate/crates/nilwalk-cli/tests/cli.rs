use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn nilwalk(dir: &Path, args: &[&str], spec: &str) -> (i32, Value) {
    let cfg = dir.join("spec.json");
    std::fs::write(&cfg, spec).unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_nilwalk"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env_remove("NILWALK_SEED")
        .output()
        .unwrap();
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    (status.status.code().unwrap(), manifest)
}

const GAUSSIAN_WALK: &str = r#"{
  "algebra": "heisenberg",
  "measure": {"kind": "gaussian", "mean": [0, 1, 0], "cov": [[1, 0, 0], [0, 1, 0], [0, 0, 0]]},
  "task": {"kind": "simulate-walk", "steps": 32, "trials": 500},
  "seed": 5
}"#;

#[test]
fn filtration_of_biased_heisenberg() {
    let d = tempfile::tempdir().unwrap();
    let (code, m) = nilwalk(d.path(), &["filtration"], r#"{"algebra": "heisenberg", "bias": [0, 1, 0]}"#);
    assert_eq!(code, 0);
    assert_eq!(m["summary"]["homogeneous_dimension"], 5);
    let body: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("out/filtration.json")).unwrap()).unwrap();
    assert_eq!(body["decomposition"]["homogeneous_dimension"], 5);
}

#[test]
fn gaussian_check_on_filiform() {
    let d = tempfile::tempdir().unwrap();
    let (code, m) = nilwalk(d.path(), &["check"], r#"{"algebra": "filiform3", "bias": [1, 0, 0, 0], "task": {"kind": "gaussian-check"}}"#);
    assert_eq!(code, 0);
    assert_eq!(m["summary"]["gaussian"], true);
    let (_, m) = nilwalk(d.path(), &["check"], r#"{"algebra": "filiform3", "bias": [0, 1, 0, 0]}"#);
    assert_eq!(m["summary"]["gaussian"], false);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, ma) = nilwalk(a.path(), &["walk"], GAUSSIAN_WALK);
    let (cb, mb) = nilwalk(b.path(), &["walk", "--threads", "1"], GAUSSIAN_WALK);
    assert_eq!((ca, cb), (0, 0));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    let read = |d: &Path| std::fs::read(d.join("out/endpoints.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let text = String::from_utf8(read(a.path())).unwrap();
    assert!(text.starts_with("e1,e2,e3\n"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn seed_flag_changes_hash_and_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, ma) = nilwalk(a.path(), &["walk"], GAUSSIAN_WALK);
    let (_, mb) = nilwalk(b.path(), &["walk", "--seed", "6"], GAUSSIAN_WALK);
    assert_ne!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(mb["seed"], 6);
    let read = |d: &Path| std::fs::read(d.join("out/endpoints.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let (code, m) = nilwalk(d.path(), &["walk"], r#"{"algebra": "heisenberg", "colour": 1}"#);
    assert_eq!(code, 2);
    assert_eq!(m["status"], "error");
    let unseeded = GAUSSIAN_WALK.replace(r#""seed": 5"#, r#""output": "x""#);
    assert_eq!(nilwalk(d.path(), &["walk"], &unseeded).0, 2);
    assert_eq!(nilwalk(d.path(), &["llt"], GAUSSIAN_WALK).0, 2);
    assert_eq!(nilwalk(d.path(), &["algebra"], r#"{"algebra": "nonsense"}"#).0, 2);
}

#[test]
fn degenerate_covariance_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let spec = r#"{
      "algebra": "heisenberg",
      "measure": {"kind": "gaussian", "mean": [0, 0, 0], "cov": [[1, 0, 0], [0, 0, 0], [0, 0, 1]]},
      "task": {"kind": "simulate-diffusion", "trials": 10},
      "seed": 1
    }"#;
    let (code, m) = nilwalk(d.path(), &["diffusion"], spec);
    assert_eq!(code, 3);
    assert!(m["error"].as_str().unwrap().contains("degenerate"));
}

#[test]
fn small_llt_budget_exits_4() {
    let d = tempfile::tempdir().unwrap();
    let spec = r#"{
      "algebra": "heisenberg",
      "measure": {"kind": "gaussian", "mean": [0, 0, 0], "cov": [[1, 0, 0], [0, 1, 0], [0, 0, 0]]},
      "task": {"kind": "llt", "steps": 64, "samples": 1000, "density": {"kind": "levy"},
               "function": {"height": 1, "factors": [
                 {"kind": "bump", "center": 0, "radius": 1},
                 {"kind": "bump", "center": 0, "radius": 1},
                 {"kind": "bump", "center": 0, "radius": 1}]}},
      "seed": 1
    }"#;
    let (code, m) = nilwalk(d.path(), &["llt"], spec);
    assert_eq!(code, 4);
    assert!(m["error"].as_str().unwrap().contains("budget"));
}

#[test]
fn support_endpoints_and_integrals() {
    let d = tempfile::tempdir().unwrap();
    let spec = r#"{
      "algebra": "filiform3",
      "bias": [0, 1, 0, 0],
      "task": {"kind": "support",
               "controls": [[[[1, 0, 0, 0], "1/2"], [[0, 0, 0, 0], "1/2"]]],
               "paths": [{"breakpoints": [0, "1/2", 1], "values": [[1, 0, 0, 0], [0, 1, 0, 0]]}]}
    }"#;
    let (code, _) = nilwalk(d.path(), &["support"], spec);
    assert_eq!(code, 0);
    let body: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("out/support.json")).unwrap()).unwrap();
    assert_ne!(body["endpoints"][0]["membership"], "outside");
    assert_eq!(body["integrals"].as_array().unwrap().len(), 1);
}

#[test]
fn dc_check_reports_certificate() {
    let d = tempfile::tempdir().unwrap();
    let spec = r#"{"algebra": "filiform3", "task": {"kind": "dc-check", "generators": [[1, 0, 0, 0], [0, 1, 0, 0]]}, "seed": 3}"#;
    let (code, m) = nilwalk(d.path(), &["check"], spec);
    assert_eq!(code, 0);
    assert_eq!(m["summary"]["holds"], false);
    assert!(m["summary"]["certificate"].is_object());
}
