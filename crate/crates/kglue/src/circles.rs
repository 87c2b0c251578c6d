//! A minimal weighted branched space: two circle branches of weight 1/2
//! identified along a closed arc. The local weight is the sum of the weights
//! of the branches passing through a point: 1 on the (closed) identified arc,
//! 1/2 elsewhere.

use num_rational::Rational64;
use serde_json::json;

use crate::report::{CheckResult, Report};

pub struct TwoCircles {
  /// Closed identified arc, in angle coordinates on [0, 2*pi).
  pub arc: (f64, f64),
}

impl Default for TwoCircles {
  fn default() -> Self {
    TwoCircles { arc: (0.5, 2.0) }
  }
}

impl TwoCircles {
  fn wrap(theta: f64) -> f64 {
    theta.rem_euclid(std::f64::consts::TAU)
  }

  pub fn on_arc(&self, theta: f64) -> bool {
    let t = Self::wrap(theta);
    t >= self.arc.0 && t <= self.arc.1
  }

  /// Local weight: branches through the point, weighted 1/2 each.
  pub fn weight_at(&self, theta: f64) -> Rational64 {
    if self.on_arc(theta) {
      Rational64::new(1, 1)
    } else {
      Rational64::new(1, 2)
    }
  }

  /// Evenly spaced points strictly inside the identified arc.
  pub fn arc_interior_samples(&self, n: usize) -> Vec<f64> {
    let (a, b) = self.arc;
    let margin = 0.05 * (b - a);
    (0..n).map(|k| a + margin + (b - a - 2.0 * margin) * k as f64 / (n.max(2) - 1) as f64).collect()
  }

  /// Evenly spaced points strictly outside the identified arc.
  pub fn off_arc_samples(&self, n: usize) -> Vec<f64> {
    let (a, b) = self.arc;
    let gap = std::f64::consts::TAU - (b - a);
    let margin = 0.05 * gap;
    (0..n)
      .map(|k| Self::wrap(b + margin + (gap - 2.0 * margin) * k as f64 / (n.max(2) - 1) as f64))
      .collect()
  }

  /// Check the weight pattern at sampled points.
  pub fn report(&self, n: usize) -> Report {
    let mut worst = 0.0f64;
    for t in self.arc_interior_samples(n) {
      if self.weight_at(t) != Rational64::new(1, 1) {
        worst = 1.0;
      }
    }
    for t in self.off_arc_samples(n) {
      if self.weight_at(t) != Rational64::new(1, 2) {
        worst = 1.0;
      }
    }
    // endpoints belong to the closed arc
    for t in [self.arc.0, self.arc.1] {
      if self.weight_at(t) != Rational64::new(1, 1) {
        worst = 1.0;
      }
    }
    let checks = vec![CheckResult::new("branch-weights", 2 * n + 2, worst, 0.5)];
    Report::new("example", "two-circles", checks).with_values(json!({
      "arc": [self.arc.0, self.arc.1],
      "weight_on_arc": "1",
      "weight_off_arc": "1/2",
    }))
  }
}
