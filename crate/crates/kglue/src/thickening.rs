//! Thickened chart domains and the intermediate space used while gluing.
//!
//! A point of the intermediate space is a tuple (e, x, t) inside a fixed
//! ambient chart J: collar coordinates t (one per basic index, nonnegative,
//! supported on J, summing to 1), a parameter point x of chart J, and an
//! obstruction vector e. The defining relation is t_j e_j = s_j(x) for every
//! j in J; indices with t_j > 0 form the current stratum, and components of e
//! outside J are free thickening coordinates.

use crate::atlas::{Atlas, IndexSet};
use crate::util::V;

#[derive(Clone, Debug)]
pub struct YPoint {
  pub ambient: IndexSet,
  pub e: V,
  pub x: V,
  pub t: Vec<f64>,
}

impl YPoint {
  /// Indices with positive collar coordinate.
  pub fn stratum(&self) -> IndexSet {
    IndexSet::from_slice(
      &self.t.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect::<Vec<_>>(),
    )
  }
}

/// Defect of the defining relations: t_j e_j = s_j(x) on the ambient index
/// set and sum(t) = 1.
pub fn y_residual(atlas: &Atlas, y: &YPoint) -> f64 {
  let s = atlas.section_at(y.ambient, &y.x);
  let mut worst = (y.t.iter().sum::<f64>() - 1.0).abs();
  for b in y.ambient.iter() {
    let scaled = atlas.obs.get_comp(&y.e, b) * y.t[b];
    worst = worst.max((scaled - atlas.obs.get_comp(&s, b)).norm());
  }
  worst
}

pub fn y_contains(atlas: &Atlas, y: &YPoint, tol: f64) -> bool {
  (atlas.chart(y.ambient).contains)(&y.x) && y_residual(atlas, y) <= tol
}

/// Embed a point of chart J lying over the stratum I (so s_{J\I}(x) = 0) at
/// the barycenter of the I-face: t_i = 1/|I| on I, hence e_i = |I| * s_i(x).
/// Components of e outside I are taken from `e_rest`.
pub fn iota_ev(atlas: &Atlas, ambient: IndexSet, i: IndexSet, e_rest: &V, x: &V) -> YPoint {
  let n = atlas.n_basic;
  let l = i.len() as f64;
  let mut t = vec![0.0; n];
  let s = atlas.section_at(ambient, x);
  let mut e = atlas.obs.project(e_rest, atlas.full_minus(i));
  for b in i.iter() {
    t[b] = 1.0 / l;
    let comp = atlas.obs.get_comp(&s, b) * l;
    atlas.obs.set_comp(&mut e, b, &comp);
  }
  YPoint { ambient, e, x: x.clone(), t }
}

/// Project to the thickened chart of the ambient index set, keeping the free
/// obstruction coordinates.
pub fn project_m(atlas: &Atlas, y: &YPoint) -> (IndexSet, V, V) {
  (y.ambient, atlas.obs.project(&y.e, atlas.full_minus(y.ambient)), y.x.clone())
}

/// Rescale the collar coordinates on H: e_i -> e_i / mu_i, t_i -> mu_i t_i.
/// Leaves the defining relations invariant; the caller is responsible for
/// keeping sum(t) = 1.
pub fn rescale(atlas: &Atlas, y: &YPoint, h: IndexSet, mu: &[f64]) -> YPoint {
  let mut out = y.clone();
  for (k, b) in h.iter().enumerate() {
    let comp = atlas.obs.get_comp(&y.e, b) / mu[k];
    atlas.obs.set_comp(&mut out.e, b, &comp);
    out.t[b] = y.t[b] * mu[k];
  }
  out
}
