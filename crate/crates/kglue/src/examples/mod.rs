//! Worked atlases. The annulus-based composite charts share one template: a
//! chart for index set K has one planar obstruction slot per index above the
//! smallest, plus the annulus coordinate; the smallest index's obstruction
//! value is derived from the rotating-frame constraint
//!   sum_{i in K} rot(mu_i(theta)) e_i = 0.

use std::collections::HashMap;
use std::sync::Arc;

use crate::atlas::{ActFn, Gel, IndexSet, MapFn, Obstruction, PhiFn, PredFn, SamplerFn};
use crate::util::{self, V};

pub mod football;
pub mod redundant;

pub use football::{football, tangent_sphere};
pub use redundant::redundant;

pub(crate) const TAU: f64 = std::f64::consts::TAU;

/// Point of the unit sphere at colatitude fraction u and longitude theta.
pub(crate) fn sphere_pt(u: f64, theta: f64) -> V {
  let su = (std::f64::consts::PI * u).sin();
  let cu = (std::f64::consts::PI * u).cos();
  V::from_vec(vec![su * theta.cos(), su * theta.sin(), cu])
}

pub(crate) fn sphere_u(xp: &V) -> f64 {
  xp[2].clamp(-1.0, 1.0).acos() / std::f64::consts::PI
}

/// Frame angles and chart geometry shared by the charts of one atlas.
pub(crate) struct Geometry {
  /// Frame angle mu_i as a function of the annulus angle.
  pub mus: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
  /// Longitude of the underlying point: theta_X = theta_scale * theta.
  pub theta_scale: f64,
  /// Parameter coordinates of basic chart b at colatitude u, annulus angle t.
  pub basic_from_polar: Arc<dyn Fn(usize, f64, f64) -> V + Send + Sync>,
  /// Effective colatitude range of each chart, for overlap samplers.
  pub u_ranges: HashMap<u32, (f64, f64)>,
  /// Singleton charts whose parameter is the annulus coordinate itself.
  pub annulus_basics: IndexSet,
}

pub(crate) const SLOT_MAX: f64 = 0.2;
pub(crate) const SLOT_SAMPLE: f64 = 0.1;

pub(crate) fn comp_dim(k: IndexSet) -> usize {
  2 * k.len()
}

/// Indices with their own parameter slot (everything above the smallest).
pub(crate) fn comp_slots(k: IndexSet) -> Vec<usize> {
  k.iter().skip(1).collect()
}

pub(crate) fn comp_zeta(k: IndexSet, x: &V) -> (f64, f64) {
  let d = comp_dim(k);
  (x[d - 2], x[d - 1])
}

pub(crate) fn comp_u(k: IndexSet, x: &V) -> f64 {
  let (a, b) = comp_zeta(k, x);
  (a * a + b * b).sqrt()
}

pub(crate) fn comp_theta(k: IndexSet, x: &V) -> f64 {
  let (a, b) = comp_zeta(k, x);
  b.atan2(a)
}

/// All obstruction values of a composite chart point, including the derived
/// smallest component.
pub(crate) fn comp_evals(geo: &Geometry, k: IndexSet, x: &V) -> Vec<(usize, (f64, f64))> {
  let theta = comp_theta(k, x);
  let slots = comp_slots(k);
  let mut out = Vec::with_capacity(k.len());
  let (mut sx, mut sy) = (0.0, 0.0);
  for (pos, &i) in slots.iter().enumerate() {
    let e = (x[2 * pos], x[2 * pos + 1]);
    let r = util::rot2_apply((geo.mus)(i, theta), e.0, e.1);
    sx += r.0;
    sy += r.1;
    out.push((i, e));
  }
  let min = k.min_index().unwrap();
  let em = util::rot2_apply(-(geo.mus)(min, theta), -sx, -sy);
  out.push((min, em));
  out
}

pub(crate) fn comp_section(obs: &Obstruction, geo: &Arc<Geometry>, k: IndexSet) -> MapFn {
  let obs = obs.clone();
  let geo = geo.clone();
  Box::new(move |x: &V| {
    let mut e = V::zeros(obs.total());
    for (i, v) in comp_evals(&geo, k, x) {
      obs.set_comp(&mut e, i, &util::vec2(v.0, v.1));
    }
    e
  })
}

pub(crate) fn comp_contains(k: IndexSet, lo: f64, hi: f64) -> PredFn {
  Box::new(move |x: &V| {
    let u = comp_u(k, x);
    if u <= lo || u >= hi {
      return false;
    }
    comp_slots(k)
      .iter()
      .enumerate()
      .all(|(pos, _)| (x[2 * pos] * x[2 * pos] + x[2 * pos + 1] * x[2 * pos + 1]).sqrt() < SLOT_MAX)
  })
}

pub(crate) fn comp_bbox(k: IndexSet, hi: f64) -> Vec<(f64, f64)> {
  let mut b = vec![(-SLOT_MAX, SLOT_MAX); 2 * (k.len() - 1)];
  b.push((-hi, hi));
  b.push((-hi, hi));
  b
}

pub(crate) fn comp_base(geo: &Arc<Geometry>, k: IndexSet) -> MapFn {
  let geo = geo.clone();
  Box::new(move |x: &V| sphere_pt(comp_u(k, x), geo.theta_scale * comp_theta(k, x)))
}

/// Group action on a composite chart: rotate the annulus coordinate by a
/// per-element angle, rotate each slot by its factor's representation.
pub(crate) fn comp_act(
  k: IndexSet,
  zeta_shift: Arc<dyn Fn(&Gel) -> f64 + Send + Sync>,
  rep_angle: Arc<dyn Fn(usize, &Gel) -> f64 + Send + Sync>,
) -> ActFn {
  Box::new(move |g: &Gel, x: &V| {
    let mut out = x.clone();
    let slots = comp_slots(k);
    for (pos, &i) in slots.iter().enumerate() {
      let r = util::rot2_apply(rep_angle(i, g), x[2 * pos], x[2 * pos + 1]);
      out[2 * pos] = r.0;
      out[2 * pos + 1] = r.1;
    }
    let d = comp_dim(k);
    let r = util::rot2_apply(zeta_shift(g), x[d - 2], x[d - 1]);
    out[d - 2] = r.0;
    out[d - 1] = r.1;
    out
  })
}

/// Product structure phi_{I,K} on a composite chart K: target obstruction
/// values are the supplied ones on K \ I and the current section values on I;
/// when the derived (smallest) index of K is not in I, the smallest index of
/// I absorbs the constraint instead. The annulus coordinate never moves.
pub(crate) fn make_phi(obs: &Obstruction, geo: &Arc<Geometry>, i: IndexSet, k: IndexSet) -> PhiFn {
  let obs = obs.clone();
  let geo = geo.clone();
  Box::new(move |e: &V, y: &V| {
    let theta = comp_theta(k, y);
    let mut t: HashMap<usize, (f64, f64)> = HashMap::new();
    for (idx, v) in comp_evals(&geo, k, y) {
      if i.contains(idx) {
        t.insert(idx, v);
      }
    }
    for idx in k.minus(&i).iter() {
      let v = obs.get_comp(e, idx);
      t.insert(idx, (v[0], v[1]));
    }
    let mink = k.min_index().unwrap();
    if !i.contains(mink) {
      let j0 = i.min_index().unwrap();
      let (mut sx, mut sy) = (0.0, 0.0);
      for idx in k.iter() {
        if idx == j0 {
          continue;
        }
        let v = t[&idx];
        let r = util::rot2_apply((geo.mus)(idx, theta), v.0, v.1);
        sx += r.0;
        sy += r.1;
      }
      let adj = util::rot2_apply(-(geo.mus)(j0, theta), -sx, -sy);
      t.insert(j0, adj);
    }
    let mut out = y.clone();
    for (pos, idx) in comp_slots(k).iter().enumerate() {
      let v = t[idx];
      out[2 * pos] = v.0;
      out[2 * pos + 1] = v.1;
    }
    out
  })
}

/// Coordinate change from a composite chart K down to chart I: read off I's
/// slots (or convert the annulus coordinate for a basic disc chart).
pub(crate) fn make_rho(geo: &Arc<Geometry>, i: IndexSet, k: IndexSet) -> MapFn {
  let geo = geo.clone();
  Box::new(move |y: &V| {
    let u = comp_u(k, y);
    let theta = comp_theta(k, y);
    if i.len() == 1 && !geo.annulus_basics.contains(i.min_index().unwrap()) {
      return (geo.basic_from_polar)(i.min_index().unwrap(), u, theta);
    }
    let mut out = V::zeros(comp_dim(i));
    let kslots = comp_slots(k);
    for (pos, idx) in comp_slots(i).iter().enumerate() {
      let kpos = kslots.iter().position(|s| s == idx).unwrap();
      out[2 * pos] = y[2 * kpos];
      out[2 * pos + 1] = y[2 * kpos + 1];
    }
    let d = comp_dim(i);
    let (a, b) = comp_zeta(k, y);
    out[d - 2] = a;
    out[d - 1] = b;
    out
  })
}

/// Sampler of the overlap locus of chart I inside composite chart K: free
/// slots of I drawn from a small box, I's derived component from its own
/// constraint, all other slots zero.
pub(crate) fn make_tilde_sampler(
  geo: &Arc<Geometry>,
  i: IndexSet,
  k: IndexSet,
  band: (f64, f64),
) -> (SamplerFn, usize) {
  let geo = geo.clone();
  let dim = comp_dim(i);
  let sampler: SamplerFn = Box::new(move |cube: &[f64]| {
    let r = band.0 + cube[dim - 2] * (band.1 - band.0);
    let theta = cube[dim - 1] * TAU;
    let mut vals: HashMap<usize, (f64, f64)> = HashMap::new();
    if i.len() > 1 {
      let islots = comp_slots(i);
      let (mut sx, mut sy) = (0.0, 0.0);
      for (pos, &idx) in islots.iter().enumerate() {
        let e = ((cube[2 * pos] - 0.5) * 2.0 * SLOT_SAMPLE, (cube[2 * pos + 1] - 0.5) * 2.0 * SLOT_SAMPLE);
        let rr = util::rot2_apply((geo.mus)(idx, theta), e.0, e.1);
        sx += rr.0;
        sy += rr.1;
        vals.insert(idx, e);
      }
      let imin = i.min_index().unwrap();
      vals.insert(imin, util::rot2_apply(-(geo.mus)(imin, theta), -sx, -sy));
    }
    let mut out = V::zeros(comp_dim(k));
    for (pos, idx) in comp_slots(k).iter().enumerate() {
      if let Some(v) = vals.get(idx) {
        out[2 * pos] = v.0;
        out[2 * pos + 1] = v.1;
      }
    }
    let d = comp_dim(k);
    out[d - 2] = r * theta.cos();
    out[d - 1] = r * theta.sin();
    out
  });
  (sampler, dim)
}

/// Overlap colatitude band of two charts, shrunk for sampling safety.
pub(crate) fn overlap_band(geo: &Geometry, i: IndexSet, k: IndexSet) -> (f64, f64) {
  let (li, hi_i) = geo.u_ranges[&i.key()];
  let (lk, hk) = geo.u_ranges[&k.key()];
  (li.max(lk) + 0.02, hi_i.min(hk) - 0.02)
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
  if b == 0 { a } else { gcd(b, a % b) }
}
