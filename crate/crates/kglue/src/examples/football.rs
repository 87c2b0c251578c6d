//! Atlas over a sphere with two cone points of orders p and q at the poles.
//! Two disc charts around the poles carry cyclic group actions; one composite
//! chart over the equatorial annulus ties them together through a rotating
//! frame. The expected zero count of the perturbed glued section is
//! 1/p + 1/q.

use std::collections::HashMap;
use std::sync::Arc;

use crate::atlas::{
  Atlas, Chart, CoordChange, Groups, IndexSet, Mutation, Obstruction, ProductStructure,
};
use crate::error::{KgError, Result};
use crate::util::{self, M, V};

use super::*;

/// Coprime pole orders are required: otherwise the annulus overlap of the two
/// disc charts is disconnected and no single composite chart covers it.
pub fn football(p: usize, q: usize, mutation: Mutation) -> Result<Atlas> {
  if p == 0 || q == 0 {
    return Err(KgError::Config("pole orders must be positive".into()));
  }
  if gcd(p, q) != 1 {
    return Err(KgError::Config(format!(
      "pole orders ({p}, {q}) must be coprime: the polar charts overlap in a connected band only in that case"
    )));
  }
  if mutation == Mutation::BrokenCocycle {
    return Err(KgError::Config(
      "the cocycle mutation needs nested composite charts; use the redundant atlas".into(),
    ));
  }

  let obs = Obstruction { dims: vec![2, 2] };
  let rot_reps = |order: usize| -> Vec<M> {
    (0..order)
      .map(|a| {
        let th = TAU * a as f64 / order as f64;
        M::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()])
      })
      .collect()
  };
  let groups = Groups { orders: vec![p, q], e_reps: vec![rot_reps(p), rot_reps(q)] };

  let i1 = IndexSet::singleton(0);
  let i2 = IndexSet::singleton(1);
  let i12 = IndexSet::from_slice(&[0, 1]);

  let (pf, qf) = (p as f64, q as f64);
  let mut u_ranges = HashMap::new();
  u_ranges.insert(i1.key(), (0.0, 0.7));
  u_ranges.insert(i2.key(), (0.3, 1.0));
  u_ranges.insert(i12.key(), (0.34, 0.66));
  let geo = Arc::new(Geometry {
    mus: Arc::new(move |i, th| if i == 0 { -qf * th } else { std::f64::consts::PI + pf * th }),
    theta_scale: pf * qf,
    basic_from_polar: Arc::new(move |b, u, th| {
      if b == 0 {
        util::vec2(u * (qf * th).cos(), u * (qf * th).sin())
      } else {
        util::vec2((1.0 - u) * (-pf * th).cos(), (1.0 - u) * (-pf * th).sin())
      }
    }),
    u_ranges,
    annulus_basics: IndexSet::empty(),
  });

  // shift of the annulus angle realizing the group element (a, b): the unique
  // multiple of 2*pi/(p*q) congruent to a at one pole and to -b at the other
  let cp = util::mod_inv(q % p.max(1), p).unwrap_or(0);
  let cq = util::mod_inv(p % q.max(1), q).unwrap_or(0);
  let pq = p * q;
  let zeta_shift = Arc::new(move |g: &Vec<usize>| {
    let k = ((g[0] * q * cp) % pq + pq - (g[1] * p * cq) % pq) % pq;
    TAU * k as f64 / pq as f64
  });
  let rep_angle = Arc::new(move |i: usize, g: &Vec<usize>| {
    if i == 0 { TAU * g[0] as f64 / pf } else { TAU * g[1] as f64 / qf }
  });

  let total = obs.total();
  let mut charts = HashMap::new();
  charts.insert(
    i1.key(),
    Chart {
      index: i1,
      dim: 2,
      bbox: vec![(-0.7, 0.7), (-0.7, 0.7)],
      contains: Box::new(|z: &V| z.norm() < 0.7),
      section: Box::new(move |_| V::zeros(total)),
      base: Box::new(move |z: &V| sphere_pt(z.norm(), pf * z[1].atan2(z[0]))),
      act: Box::new(move |g, z: &V| {
        let r = util::rot2_apply(TAU * g[0] as f64 / pf, z[0], z[1]);
        util::vec2(r.0, r.1)
      }),
      orientation_sign: 1.0,
    },
  );
  charts.insert(
    i2.key(),
    Chart {
      index: i2,
      dim: 2,
      bbox: vec![(-0.7, 0.7), (-0.7, 0.7)],
      contains: Box::new(|w: &V| w.norm() < 0.7),
      section: Box::new(move |_| V::zeros(total)),
      base: Box::new(move |w: &V| sphere_pt(1.0 - w.norm(), -qf * w[1].atan2(w[0]))),
      act: Box::new(move |g, w: &V| {
        let r = util::rot2_apply(TAU * g[1] as f64 / qf, w[0], w[1]);
        util::vec2(r.0, r.1)
      }),
      orientation_sign: 1.0,
    },
  );
  let mut sec12 = comp_section(&obs, &geo, i12);
  if mutation == Mutation::BrokenSectionCompat {
    let inner = sec12;
    let obs_c = obs.clone();
    sec12 = Box::new(move |x: &V| {
      let mut s = inner(x);
      let mut c = obs_c.get_comp(&s, 0);
      c[1] += 0.002;
      obs_c.set_comp(&mut s, 0, &c);
      s
    });
  }
  charts.insert(
    i12.key(),
    Chart {
      index: i12,
      dim: comp_dim(i12),
      bbox: comp_bbox(i12, 0.66),
      contains: comp_contains(i12, 0.34, 0.66),
      section: sec12,
      base: comp_base(&geo, i12),
      act: comp_act(i12, zeta_shift, rep_angle),
      orientation_sign: 1.0,
    },
  );

  let mut changes = HashMap::new();
  let mut prods = HashMap::new();
  for i in [i1, i2] {
    let band = overlap_band(&geo, i, i12);
    let (sampler, dim) = make_tilde_sampler(&geo, i, i12, band);
    changes.insert(
      (i.key(), i12.key()),
      CoordChange {
        small: i,
        big: i12,
        rho: make_rho(&geo, i, i12),
        tilde_sampler: sampler,
        tilde_sampler_dim: dim,
      },
    );
    prods.insert(
      (i.key(), i12.key()),
      ProductStructure { small: i, big: i12, eps: 0.1, phi: make_phi(&obs, &geo, i, i12) },
    );
  }

  let beta1 = |u: f64| util::ramp_down(u, 0.45, 0.55);
  let geo_nu = geo.clone();
  let obs_nu = obs.clone();
  let nu = Box::new(move |i: IndexSet, x: &V| -> V {
    let mut out = V::zeros(obs_nu.total());
    if i == IndexSet::singleton(0) {
      let b = beta1(x.norm());
      obs_nu.set_comp(&mut out, 0, &util::vec2(b * x[0], b * x[1]));
    } else if i == IndexSet::singleton(1) {
      let b = 1.0 - beta1(1.0 - x.norm());
      obs_nu.set_comp(&mut out, 1, &util::vec2(-b * x[0], -b * x[1]));
    } else {
      let u = comp_u(i, x);
      let theta = comp_theta(i, x);
      let betas = [beta1(u), 1.0 - beta1(u)];
      let cs = [u, 1.0 - u];
      for idx in 0..2 {
        let r = util::rot2_apply(-(geo_nu.mus)(idx, theta), betas[idx] * cs[idx], 0.0);
        obs_nu.set_comp(&mut out, idx, &util::vec2(r.0, r.1));
      }
    }
    out
  });

  Ok(Atlas {
    name: format!("football-{p}-{q}"),
    n_basic: 2,
    d: 0,
    obs,
    groups,
    poset: vec![i1, i2, i12],
    charts,
    changes,
    prods,
    x_dim: 3,
    x_sampler: Box::new(|k, seed| {
      let pt = util::halton_in_box(k, &[(0.02, 0.98), (0.0, TAU)], seed);
      sphere_pt(pt[0], pt[1])
    }),
    strengths: vec![
      Box::new(|xp: &V| util::ramp_down(sphere_u(xp), 0.58, 0.66)),
      Box::new(|xp: &V| util::ramp_up(sphere_u(xp), 0.34, 0.42)),
    ],
    nu,
    margins: vec![0.40, 0.25, 0.10],
    mutation,
  })
}

/// The unperturbed tangent-sphere model: both pole orders 1.
pub fn tangent_sphere(mutation: Mutation) -> Result<Atlas> {
  football(1, 1, mutation).map(|mut a| {
    a.name = "tangent-sphere".into();
    a
  })
}
