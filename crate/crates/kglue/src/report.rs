//! Serializable reports with a stable schema.

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "kglue-report-v1";

#[derive(Serialize, Debug, Clone)]
pub struct CheckResult {
  pub name: String,
  pub samples: usize,
  pub max_residual: f64,
  pub tolerance: f64,
  pub pass: bool,
  #[serde(skip_serializing_if = "Option::is_none")]
  pub detail: Option<String>,
}

impl CheckResult {
  pub fn new(name: &str, samples: usize, max_residual: f64, tolerance: f64) -> Self {
    CheckResult {
      name: name.to_string(),
      samples,
      max_residual,
      tolerance,
      pass: max_residual <= tolerance,
      detail: None,
    }
  }

  pub fn with_detail(mut self, d: String) -> Self {
    self.detail = Some(d);
    self
  }
}

#[derive(Serialize, Debug, Clone)]
pub struct Report {
  pub schema_version: &'static str,
  pub command: String,
  pub subject: String,
  pub pass: bool,
  pub checks: Vec<CheckResult>,
  #[serde(skip_serializing_if = "Option::is_none")]
  pub values: Option<serde_json::Value>,
}

impl Report {
  pub fn new(command: &str, subject: &str, checks: Vec<CheckResult>) -> Self {
    let pass = checks.iter().all(|c| c.pass);
    Report {
      schema_version: SCHEMA_VERSION,
      command: command.to_string(),
      subject: subject.to_string(),
      pass,
      checks,
      values: None,
    }
  }

  pub fn with_values(mut self, v: serde_json::Value) -> Self {
    self.values = Some(v);
    self
  }

  pub fn to_text(&self) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} [{}]\n", self.command, self.subject));
    for c in &self.checks {
      out.push_str(&format!(
        "  {} {:<40} samples={:<5} max_residual={:<12.3e} tol={:.1e}{}\n",
        if c.pass { "PASS" } else { "FAIL" },
        c.name,
        c.samples,
        c.max_residual,
        c.tolerance,
        c.detail.as_deref().map(|d| format!("  ({d})")).unwrap_or_default()
      ));
    }
    if let Some(v) = &self.values {
      out.push_str(&format!("  values: {}\n", v));
    }
    out.push_str(&format!("overall: {}\n", if self.pass { "PASS" } else { "FAIL" }));
    out
  }
}
