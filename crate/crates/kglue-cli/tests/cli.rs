//! Exercise the binary end to end: exit codes, report formats, config files,
//! and determinism of the emitted reports.

use std::io::Write;
use std::process::{Command, Output};

fn kglue(args: &[&str]) -> Output {
  Command::new(env!("CARGO_BIN_EXE_kglue")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
  String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn count_tangent_sphere_is_two() {
  let out = kglue(&["count", "--example", "tangent-sphere"]);
  assert_eq!(out.status.code(), Some(0));
  let text = stdout(&out);
  assert!(text.contains("\"count\":\"2\""), "{text}");
  assert!(text.contains("overall: PASS"), "{text}");
}

#[test]
fn count_football_is_five_sixths() {
  let out = kglue(&["count", "--example", "football", "--p", "2", "--q", "3"]);
  assert_eq!(out.status.code(), Some(0));
  assert!(stdout(&out).contains("\"count\":\"5/6\""));
}

#[test]
fn json_report_has_stable_schema() {
  let out = kglue(&["validate", "--example", "tangent-sphere", "--format", "json"]);
  assert_eq!(out.status.code(), Some(0));
  let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
  assert_eq!(v["schema_version"], "kglue-report-v1");
  assert_eq!(v["command"], "validate");
  assert_eq!(v["pass"], true);
  assert!(v["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn reports_are_byte_identical_across_runs() {
  let a = kglue(&["count", "--example", "football", "--format", "json"]);
  let b = kglue(&["count", "--example", "football", "--format", "json"]);
  assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_the_same_report() {
  let dir = tempfile::tempdir().unwrap();
  let path = dir.path().join("report.json");
  let out = kglue(&[
    "validate",
    "--example",
    "tangent-sphere",
    "--format",
    "json",
    "--out",
    path.to_str().unwrap(),
  ]);
  assert_eq!(out.status.code(), Some(0));
  assert_eq!(std::fs::read(&path).unwrap(), out.stdout);
}

#[test]
fn broken_atlas_config_fails_validation_on_cocycle() {
  let dir = tempfile::tempdir().unwrap();
  let path = dir.path().join("broken.atlas");
  let mut f = std::fs::File::create(&path).unwrap();
  writeln!(f, "example = \"redundant\"\nmutation = \"broken-cocycle\"").unwrap();
  let out = kglue(&["validate", "--file", path.to_str().unwrap()]);
  assert_eq!(out.status.code(), Some(10));
  let text = stdout(&out);
  assert!(text.contains("FAIL cocycle"), "{text}");
}

#[test]
fn repo_exemplar_configs_resolve() {
  let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
  let out = kglue(&["validate", "--file", &format!("{root}/configs/football.toml")]);
  assert_eq!(out.status.code(), Some(0));
  let out = kglue(&["weights", "--file", &format!("{root}/configs/two-circles.toml")]);
  assert_eq!(out.status.code(), Some(0));
  let out = kglue(&["validate", "--file", &format!("{root}/configs/broken.atlas")]);
  assert_eq!(out.status.code(), Some(10));
}

#[test]
fn flags_override_config_fields() {
  let dir = tempfile::tempdir().unwrap();
  let path = dir.path().join("fb.toml");
  std::fs::write(&path, "example = \"football\"\np = 2\nq = 3\n").unwrap();
  let out = kglue(&["count", "--file", path.to_str().unwrap(), "--p", "3", "--q", "5"]);
  assert_eq!(out.status.code(), Some(0));
  assert!(stdout(&out).contains("\"count\":\"8/15\""));
}

#[test]
fn unknown_example_is_a_config_error() {
  let out = kglue(&["count", "--example", "nosuch"]);
  assert_eq!(out.status.code(), Some(14));
}

#[test]
fn malformed_config_is_a_config_error() {
  let dir = tempfile::tempdir().unwrap();
  let path = dir.path().join("bad.toml");
  std::fs::write(&path, "example = \"football\"\nbogus_field = 1\n").unwrap();
  let out = kglue(&["count", "--file", path.to_str().unwrap()]);
  assert_eq!(out.status.code(), Some(14));
}

#[test]
fn example_command_checks_expected_values() {
  for (args, expect) in [
    (vec!["example", "--example", "tangent-sphere"], "count 2, expected 2"),
    (vec!["example", "--example", "football", "--p", "2", "--q", "3"], "count 5/6, expected 5/6"),
  ] {
    let out = kglue(&args);
    assert_eq!(out.status.code(), Some(0), "{args:?}");
    let text = stdout(&out);
    assert!(text.contains("PASS matches-expected"), "{text}");
    assert!(text.contains(expect), "{text}");
  }
}

#[test]
fn euler_command_reports_expected_numbers() {
  for (model, expect) in [("tangent-sphere", "\"euler_number\":2"), ("trivial-torus", "\"euler_number\":0")] {
    let out = kglue(&["euler", "--model", model]);
    assert_eq!(out.status.code(), Some(0), "{model}");
    assert!(stdout(&out).contains(expect), "{model}");
  }
}

#[test]
fn thread_cap_env_is_accepted() {
  let out = Command::new(env!("CARGO_BIN_EXE_kglue"))
    .env("KGLUE_THREADS", "1")
    .args(["count", "--example", "tangent-sphere"])
    .output()
    .unwrap();
  assert_eq!(out.status.code(), Some(0));
  assert!(stdout(&out).contains("\"count\":\"2\""));
}
