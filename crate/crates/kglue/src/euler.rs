//! Euler numbers of concrete vector bundles given by patchwise sections:
//! locate transverse zeros per patch, orient them, dedup across patches, and
//! sum the signs.

use serde_json::json;

use crate::error::{KgError, Result};
use crate::report::{CheckResult, Report};
use crate::util::{self, M, V};

pub struct EulerPatch {
  pub name: String,
  pub bbox: Vec<(f64, f64)>,
  pub contains: Box<dyn Fn(&V) -> bool + Send + Sync>,
  /// Section in the patch trivialization; square (dim matches parameters).
  pub fun: Box<dyn Fn(&V) -> V + Send + Sync>,
  /// Position in the ambient space, used to identify zeros across patches.
  pub xpos: Box<dyn Fn(&V) -> V + Send + Sync>,
}

pub struct BundleModel {
  pub name: String,
  pub patches: Vec<EulerPatch>,
  pub expected: i64,
}

pub struct EulerOpts {
  pub grid: usize,
  pub seed: u64,
  pub tol: f64,
}

impl Default for EulerOpts {
  fn default() -> Self {
    EulerOpts { grid: 600, seed: 6, tol: 1e-8 }
  }
}

pub fn euler_number(model: &BundleModel, opts: &EulerOpts) -> Result<(i64, Report)> {
  let mut zeros: Vec<(V, i64, f64)> = Vec::new();
  let mut worst_res = 0.0f64;

  for patch in &model.patches {
    let mut reps: Vec<V> = Vec::new();
    for k in 0..opts.grid {
      let x0 = util::halton_in_box(k, &patch.bbox, opts.seed);
      if !(patch.contains)(&x0) {
        continue;
      }
      let Some(res) = util::newton(&patch.fun, &x0, 1e-12, 80) else { continue };
      if !(patch.contains)(&res.x) {
        continue;
      }
      if reps.iter().any(|r| (r - &res.x).norm() < 1e-6) {
        continue;
      }
      worst_res = worst_res.max(res.residual);
      reps.push(res.x);
    }
    for rep in reps {
      let pos = (patch.xpos)(&rep);
      if zeros.iter().any(|(p, _, _)| (p - &pos).norm() < 1e-4) {
        continue;
      }
      let sign = util::jacobian_sign(&patch.fun, &rep, 1e-6, 1e9).ok_or_else(|| {
        KgError::Counting(format!(
          "zero in patch {} of {} is not numerically transverse",
          patch.name, model.name
        ))
      })?;
      let residual = (patch.fun)(&rep).norm();
      zeros.push((pos, sign, residual));
    }
  }

  let total: i64 = zeros.iter().map(|(_, s, _)| *s).sum();
  let mut checks = Vec::new();
  checks.push(CheckResult::new("zero-residuals", zeros.len(), worst_res, opts.tol));
  checks.push(CheckResult::new(
    "matches-expected",
    1,
    (total - model.expected).abs() as f64,
    0.0,
  ));
  let report = Report::new("euler", &model.name, checks).with_values(json!({
    "euler_number": total,
    "expected": model.expected,
    "zeros": zeros
      .iter()
      .map(|(p, s, r)| json!({
        "position": p.iter().cloned().collect::<Vec<f64>>(),
        "sign": s,
        "residual": r,
      }))
      .collect::<Vec<_>>(),
  }));
  Ok((total, report))
}

/// Stereographic parametrizations of the sphere; the second patch flips one
/// axis so both patches induce the same orientation.
fn sphere_point(a: &V, south: bool) -> V {
  let n = 1.0 + a[0] * a[0] + a[1] * a[1];
  let (y, z) = if south { (-2.0 * a[1], -(1.0 - a[0] * a[0] - a[1] * a[1])) } else {
    (2.0 * a[1], 1.0 - a[0] * a[0] - a[1] * a[1])
  };
  V::from_vec(vec![2.0 * a[0] / n, y / n, z / n])
}

/// Express an ambient tangent vector in patch coordinates via least squares
/// against the parametrization differential.
fn pull_back(a: &V, south: bool, v: &V) -> V {
  let jac = util::fd_jacobian(|p| sphere_point(p, south), a, 1e-6);
  let jt: M = jac.transpose();
  let lhs = &jt * &jac;
  let rhs = jt * v;
  lhs.lu().solve(&rhs).unwrap_or_else(|| V::zeros(a.len()))
}

/// Tangent bundle of the round sphere with the height gradient field
/// (one transverse zero at each pole, both positive).
pub fn tangent_sphere_bundle() -> BundleModel {
  let patch = |south: bool| EulerPatch {
    name: if south { "south".into() } else { "north".into() },
    bbox: vec![(-1.15, 1.15), (-1.15, 1.15)],
    contains: Box::new(|a: &V| a.norm() < 1.15),
    fun: Box::new(move |a: &V| {
      let x = sphere_point(a, south);
      let v = V::from_vec(vec![-x[2] * x[0], -x[2] * x[1], 1.0 - x[2] * x[2]]);
      pull_back(a, south, &v)
    }),
    xpos: Box::new(move |a: &V| sphere_point(a, south)),
  };
  BundleModel { name: "tangent-sphere".into(), patches: vec![patch(false), patch(true)], expected: 2 }
}

/// Trivial rank-2 bundle over the torus with a nonvanishing constant section.
pub fn trivial_torus_bundle() -> BundleModel {
  let tau = std::f64::consts::TAU;
  BundleModel {
    name: "trivial-torus".into(),
    patches: vec![EulerPatch {
      name: "torus".into(),
      bbox: vec![(0.0, tau), (0.0, tau)],
      contains: Box::new(|_| true),
      fun: Box::new(|_| V::from_vec(vec![0.3, 0.4])),
      xpos: Box::new(|p: &V| {
        V::from_vec(vec![p[0].cos(), p[0].sin(), p[1].cos(), p[1].sin()])
      }),
    }],
    expected: 0,
  }
}

/// A single disc patch with the identity section: one positive zero.
pub fn one_zero_bundle() -> BundleModel {
  BundleModel {
    name: "one-zero-disc".into(),
    patches: vec![EulerPatch {
      name: "disc".into(),
      bbox: vec![(-1.0, 1.0), (-1.0, 1.0)],
      contains: Box::new(|x: &V| x.norm() < 1.0),
      fun: Box::new(|x: &V| x.clone()),
      xpos: Box::new(|x: &V| x.clone()),
    }],
    expected: 1,
  }
}

pub fn model_by_name(name: &str) -> Option<BundleModel> {
  match name {
    "tangent-sphere" => Some(tangent_sphere_bundle()),
    "trivial-torus" => Some(trivial_torus_bundle()),
    "one-zero-disc" => Some(one_zero_bundle()),
    _ => None,
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn sphere_patches_cover_and_agree() {
    let a = V::from_vec(vec![0.4, -0.3]);
    let p = sphere_point(&a, false);
    assert!((p.norm() - 1.0).abs() < 1e-12);
    let q = sphere_point(&a, true);
    assert!((q.norm() - 1.0).abs() < 1e-12);
  }

  #[test]
  fn height_field_vanishes_at_poles_only() {
    let m = tangent_sphere_bundle();
    let f = &m.patches[0].fun;
    assert!(f(&V::from_vec(vec![0.0, 0.0])).norm() < 1e-12);
    assert!(f(&V::from_vec(vec![0.5, 0.2])).norm() > 1e-3);
  }
}
