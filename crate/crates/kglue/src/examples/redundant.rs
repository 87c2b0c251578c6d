//! Three-chart atlas over the plain sphere (both pole orders 1) with a
//! redundant equatorial band chart. All seven index sets are populated, so
//! nested composites of depth three exist; the zero count must agree with the
//! two-chart atlas.

use std::collections::HashMap;
use std::sync::Arc;

use crate::atlas::{
  Atlas, Chart, CoordChange, Groups, IndexSet, Mutation, Obstruction, ProductStructure,
};
use crate::error::Result;
use crate::util::{self, V};

use super::*;

pub fn redundant(mutation: Mutation) -> Result<Atlas> {
  let obs = Obstruction { dims: vec![2, 2, 2] };
  let groups = Groups::trivial(3, &obs);

  let i1 = IndexSet::singleton(0);
  let i2 = IndexSet::singleton(1);
  let i3 = IndexSet::singleton(2);
  let i12 = IndexSet::from_slice(&[0, 1]);
  let i13 = IndexSet::from_slice(&[0, 2]);
  let i23 = IndexSet::from_slice(&[1, 2]);
  let i123 = IndexSet::from_slice(&[0, 1, 2]);
  let poset = vec![i1, i2, i3, i12, i13, i23, i123];

  let band_narrow = (0.28, 0.62);
  let band_wide = (0.24, 0.74);
  let mut u_ranges = HashMap::new();
  u_ranges.insert(i1.key(), (0.0, 0.74));
  u_ranges.insert(i2.key(), (0.24, 1.0));
  u_ranges.insert(i3.key(), band_narrow);
  u_ranges.insert(i12.key(), band_wide);
  u_ranges.insert(i13.key(), band_narrow);
  u_ranges.insert(i23.key(), band_narrow);
  u_ranges.insert(i123.key(), band_narrow);

  let geo = Arc::new(Geometry {
    mus: Arc::new(|i, th| match i {
      0 => -th,
      1 => std::f64::consts::PI + th,
      _ => 0.0,
    }),
    theta_scale: 1.0,
    basic_from_polar: Arc::new(|b, u, th| match b {
      0 => util::vec2(u * th.cos(), u * th.sin()),
      1 => util::vec2((1.0 - u) * (-th).cos(), (1.0 - u) * (-th).sin()),
      _ => util::vec2(u * th.cos(), u * th.sin()),
    }),
    u_ranges,
    annulus_basics: i3,
  });

  let trivial_shift = Arc::new(|_: &Vec<usize>| 0.0);
  let trivial_rep = Arc::new(|_: usize, _: &Vec<usize>| 0.0);

  let total = obs.total();
  let mut charts = HashMap::new();
  charts.insert(
    i1.key(),
    Chart {
      index: i1,
      dim: 2,
      bbox: vec![(-0.74, 0.74), (-0.74, 0.74)],
      contains: Box::new(|z: &V| z.norm() < 0.74),
      section: Box::new(move |_| V::zeros(total)),
      base: Box::new(|z: &V| sphere_pt(z.norm(), z[1].atan2(z[0]))),
      act: Box::new(|_, z: &V| z.clone()),
      orientation_sign: 1.0,
    },
  );
  charts.insert(
    i2.key(),
    Chart {
      index: i2,
      dim: 2,
      bbox: vec![(-0.76, 0.76), (-0.76, 0.76)],
      contains: Box::new(|w: &V| w.norm() < 0.76),
      section: Box::new(move |_| V::zeros(total)),
      base: Box::new(|w: &V| sphere_pt(1.0 - w.norm(), -w[1].atan2(w[0]))),
      act: Box::new(|_, w: &V| w.clone()),
      orientation_sign: 1.0,
    },
  );
  for k in [i3, i12, i13, i23, i123] {
    let band = geo.u_ranges[&k.key()];
    let mut section = comp_section(&obs, &geo, k);
    if k == i12 && mutation == Mutation::BrokenSectionCompat {
      let inner = section;
      let obs_c = obs.clone();
      section = Box::new(move |x: &V| {
        let mut s = inner(x);
        let mut c = obs_c.get_comp(&s, 0);
        c[1] += 0.002;
        obs_c.set_comp(&mut s, 0, &c);
        s
      });
    }
    charts.insert(
      k.key(),
      Chart {
        index: k,
        dim: comp_dim(k),
        bbox: comp_bbox(k, band.1),
        contains: comp_contains(k, band.0, band.1),
        section,
        base: comp_base(&geo, k),
        act: comp_act(k, trivial_shift.clone(), trivial_rep.clone()),
        orientation_sign: 1.0,
      },
    );
  }

  let mut changes = HashMap::new();
  let mut prods = HashMap::new();
  for &small in &poset {
    for &big in &poset {
      if !(small.is_subset(&big) && small != big) {
        continue;
      }
      let band = overlap_band(&geo, small, big);
      let (sampler, dim) = make_tilde_sampler(&geo, small, big, band);
      let mut rho = make_rho(&geo, small, big);
      if small == i1 && big == i123 && mutation == Mutation::BrokenCocycle {
        let inner = rho;
        rho = Box::new(move |y: &V| {
          let mut z = inner(y);
          z[0] += 0.002;
          z
        });
      }
      changes.insert(
        (small.key(), big.key()),
        CoordChange { small, big, rho, tilde_sampler: sampler, tilde_sampler_dim: dim },
      );
      prods.insert(
        (small.key(), big.key()),
        ProductStructure { small, big, eps: 0.1, phi: make_phi(&obs, &geo, small, big) },
      );
    }
  }

  let beta1 = |u: f64| util::ramp_down(u, 0.34, 0.38);
  let beta2 = |u: f64| util::ramp_up(u, 0.58, 0.62);
  let geo_nu = geo.clone();
  let obs_nu = obs.clone();
  let nu = Box::new(move |i: IndexSet, x: &V| -> V {
    let mut out = V::zeros(obs_nu.total());
    if i == IndexSet::singleton(0) {
      let b = beta1(x.norm());
      obs_nu.set_comp(&mut out, 0, &util::vec2(b * x[0], b * x[1]));
    } else if i == IndexSet::singleton(1) {
      let b = beta2(1.0 - x.norm());
      obs_nu.set_comp(&mut out, 1, &util::vec2(-b * x[0], -b * x[1]));
    } else {
      let u = comp_u(i, x);
      let theta = comp_theta(i, x);
      let b1 = beta1(u);
      let b2 = beta2(u);
      let betas = [b1, b2, 1.0 - b1 - b2];
      let cs = [u, 1.0 - u, 1.0];
      for idx in 0..3 {
        let r = util::rot2_apply(-(geo_nu.mus)(idx, theta), betas[idx] * cs[idx], 0.0);
        obs_nu.set_comp(&mut out, idx, &util::vec2(r.0, r.1));
      }
    }
    out
  });

  Ok(Atlas {
    name: "redundant-three-chart".into(),
    n_basic: 3,
    d: 0,
    obs,
    groups,
    poset,
    charts,
    changes,
    prods,
    x_dim: 3,
    x_sampler: Box::new(|k, seed| {
      let pt = util::halton_in_box(k, &[(0.02, 0.98), (0.0, TAU)], seed);
      sphere_pt(pt[0], pt[1])
    }),
    strengths: vec![
      Box::new(|xp: &V| {
        let u = sphere_u(xp);
        util::ramp_down(u, 0.48, 0.50)
          + util::ramp_up(u, 0.54, 0.56) * util::ramp_down(u, 0.70, 0.74)
      }),
      Box::new(|xp: &V| {
        let u = sphere_u(xp);
        0.12 * util::ramp_up(u, 0.24, 0.26) + 0.88 * util::ramp_up(u, 0.40, 0.44)
      }),
      Box::new(|xp: &V| {
        let u = sphere_u(xp);
        util::ramp_up(u, 0.28, 0.32) * util::ramp_down(u, 0.58, 0.62)
      }),
    ],
    nu,
    margins: vec![0.40, 0.25, 0.11, 0.06],
    mutation,
  })
}
