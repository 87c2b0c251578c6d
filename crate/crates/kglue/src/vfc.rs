//! Virtual counts: perturb the glued section, locate its zero orbits chart by
//! chart, orient them, weight them, and sum the contributions as an exact
//! rational number.

use num_rational::Rational64;
use serde_json::json;

use crate::atlas::{Atlas, IndexSet};
use crate::error::{KgError, Result};
use crate::gluing::{Category, MPoint};
use crate::reduction::Reduction;
use crate::report::{CheckResult, Report};
use crate::util::{self, V};

pub struct CountOpts {
  pub mag: f64,
  pub grid: usize,
  pub seed: u64,
  pub tol: f64,
  pub newton_tol: f64,
}

impl Default for CountOpts {
  fn default() -> Self {
    CountOpts { mag: 0.05, grid: 800, seed: 5, tol: 1e-8, newton_tol: 1e-12 }
  }
}

#[derive(Clone, Debug)]
pub struct OrbitZero {
  pub index: IndexSet,
  pub x: V,
  pub base: V,
  pub sign: i64,
  pub orbit_size: usize,
  pub weight: Rational64,
  pub residual: f64,
}

/// Count the zeros of the perturbed glued section. Requires virtual dimension
/// zero; every chart system must then be square.
pub fn count(
  atlas: &Atlas,
  red: &Reduction,
  cat: &Category,
  opts: &CountOpts,
) -> Result<(Rational64, Report)> {
  if atlas.d != 0 {
    return Err(KgError::Counting(format!(
      "virtual dimension is {}, only dimension 0 admits a count",
      atlas.d
    )));
  }

  let gels = atlas.groups.elements_of(atlas.full());
  let mut orbits: Vec<OrbitZero> = Vec::new();
  let mut worst_res = 0.0f64;
  let mut spurious_floor = f64::INFINITY;

  for i in &atlas.poset {
    let ch = atlas.chart(*i);
    let de = atlas.obs.dim_of(*i);
    if ch.dim != de {
      return Err(KgError::Counting(format!(
        "chart {} system is not square ({} parameters, {} equations)",
        i, ch.dim, de
      )));
    }
    let f = |x: &V| {
      let val = atlas.section_at(*i, x) + opts.mag * (atlas.nu)(*i, x);
      atlas.obs.flatten(&val, *i)
    };

    // representatives of the zero orbits inside the reduced domain
    let mut reps: Vec<V> = Vec::new();
    for k in 0..opts.grid {
      let x0 = util::halton_in_box(k, &ch.bbox, opts.seed);
      if !(ch.contains)(&x0) {
        continue;
      }
      let Some(res) = util::newton(&f, &x0, opts.newton_tol, 80) else { continue };
      if !(ch.contains)(&res.x) || !red.v_contains(atlas, *i, &res.x) {
        continue;
      }
      let dup = reps.iter().any(|r| {
        gels.iter().any(|g| ((ch.act)(g, r) - &res.x).norm() < 1e-6)
      });
      if dup {
        continue;
      }
      worst_res = worst_res.max(res.residual);
      reps.push(res.x);
    }

    // away from the found zero orbits the perturbed section must stay
    // bounded below on the reduced domain (zeros are confined)
    for k in 0..opts.grid {
      let x0 = util::halton_in_box(k, &ch.bbox, opts.seed + 9);
      if !(ch.contains)(&x0) || !red.v_contains(atlas, *i, &x0) {
        continue;
      }
      let near = reps
        .iter()
        .any(|r| gels.iter().any(|g| ((ch.act)(g, r) - &x0).norm() < 0.15));
      if !near {
        spurious_floor = spurious_floor.min(f(&x0).norm());
      }
    }

    for rep in reps {
      // orbit size under the chart's group action
      let mut orbit_pts: Vec<V> = Vec::new();
      for g in &gels {
        let gx = (ch.act)(g, &rep);
        if !orbit_pts.iter().any(|p| (p - &gx).norm() < 1e-6) {
          orbit_pts.push(gx);
        }
      }

      // orientation sign of the full perturbed glued system in the thickened
      // coordinates (free obstruction components first, then the chart)
      let rest = atlas.full_minus(*i);
      let dr = atlas.obs.dim_of(rest);
      let full_f = |xi: &V| -> V {
        let flat = V::from_iterator(dr, (0..dr).map(|k| xi[k]));
        let x = V::from_iterator(ch.dim, (0..ch.dim).map(|k| xi[dr + k]));
        let e = atlas.obs.scatter(&flat, rest);
        let m = MPoint { index: *i, e, x: x.clone() };
        let s = match cat.s_value(&m) {
          Ok(s) => s,
          Err(_) => return V::from_element(atlas.obs.total(), 1e6),
        };
        let val = s + opts.mag * (atlas.nu)(*i, &x);
        atlas.obs.flatten(&val, atlas.full())
      };
      let mut xi0 = V::zeros(dr + ch.dim);
      for k in 0..ch.dim {
        xi0[dr + k] = rep[k];
      }
      let sign = util::jacobian_sign(full_f, &xi0, 1e-6, 1e9).ok_or_else(|| {
        KgError::Counting(format!("zero of chart {} is not numerically transverse", i))
      })?;
      let sign = sign * if ch.orientation_sign >= 0.0 { 1 } else { -1 };

      let m = MPoint { index: *i, e: V::zeros(atlas.obs.total()), x: rep.clone() };
      let weight = cat.weight(&m);
      let residual = f(&rep).norm();
      orbits.push(OrbitZero {
        index: *i,
        x: rep.clone(),
        base: atlas.base_at(*i, &rep),
        sign,
        orbit_size: orbit_pts.len(),
        weight,
        residual,
      });
    }
  }

  // the same underlying zero can be found in overlapping charts; keep one
  // representative per location on X
  let mut unique: Vec<OrbitZero> = Vec::new();
  for oz in orbits {
    if !unique.iter().any(|u| (&u.base - &oz.base).norm() < 1e-4) {
      unique.push(oz);
    }
  }

  let mut total = Rational64::new(0, 1);
  for oz in &unique {
    total += Rational64::from_integer(oz.sign * oz.orbit_size as i64) * oz.weight;
  }

  let mut checks = Vec::new();
  checks.push(CheckResult::new("zero-residuals", unique.len(), worst_res, opts.tol));
  let floor_ok = spurious_floor > 1e-4 * opts.mag;
  checks.push(
    CheckResult::new(
      "perturbed-section-bounded-below-off-zeros",
      opts.grid,
      if floor_ok { 0.0 } else { 1.0 },
      0.5,
    )
    .with_detail(format!("floor={:.3e}", spurious_floor)),
  );

  let orbit_values: Vec<serde_json::Value> = unique
    .iter()
    .map(|oz| {
      json!({
        "chart": format!("{}", oz.index),
        "sign": oz.sign,
        "orbit_size": oz.orbit_size,
        "weight": format!("{}", oz.weight),
        "residual": oz.residual,
        "base": oz.base.iter().cloned().collect::<Vec<f64>>(),
      })
    })
    .collect();
  let report = Report::new("count", &atlas.name, checks)
    .with_values(json!({ "count": format!("{}", total), "orbits": orbit_values }));
  if !report.pass {
    return Err(KgError::Counting("zero location or confinement checks failed".into()));
  }
  Ok((total, report))
}
