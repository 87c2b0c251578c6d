//! Gluing of thickened charts into one weighted branched space: local chart
//! embeddings built from collar interpolation, their inverses and fiber
//! enumeration, branch weights, and the glued section.

use std::collections::HashMap;

use num_rational::Rational64;

use crate::atlas::{Atlas, Gel, IndexSet, Mutation};
use crate::collar::collar_step;
use crate::error::{KgError, Result};
use crate::reduction::Reduction;
use crate::report::{CheckResult, Report};
use crate::thickening;
use crate::util::{self, V};

/// Point of a thickened chart M_I: free obstruction coordinates outside I
/// (stored in the full obstruction layout, zero on I) and a chart parameter
/// point.
#[derive(Clone, Debug)]
pub struct MPoint {
  pub index: IndexSet,
  pub e: V,
  pub x: V,
}

struct LiftEntry {
  rho_img: V,
  tilde: V,
}

struct ForwardEntry {
  /// free obstruction input, supported on J \ I
  e: V,
  x_i: V,
  out_x: V,
  lift: V,
}

pub struct GluingOpts {
  pub net: usize,
  pub forward_sub: usize,
  pub e_dirs: usize,
  pub check_samples: usize,
  pub seed: u64,
  pub tol: f64,
}

impl Default for GluingOpts {
  fn default() -> Self {
    GluingOpts { net: 260, forward_sub: 70, e_dirs: 5, check_samples: 40, seed: 4, tol: 1e-8 }
  }
}

/// The glued space: atlas + reduction + cached seed nets for the chart
/// embeddings and their Newton inverses.
pub struct Category<'a> {
  pub atlas: &'a Atlas,
  pub red: &'a Reduction,
  lift_nets: HashMap<(u32, u32), Vec<LiftEntry>>,
  forward_nets: HashMap<(u32, u32), Vec<ForwardEntry>>,
}

pub fn build_category<'a>(
  atlas: &'a Atlas,
  red: &'a Reduction,
  opts: &GluingOpts,
) -> Result<Category<'a>> {
  let mut cat =
    Category { atlas, red, lift_nets: HashMap::new(), forward_nets: HashMap::new() };

  for (&(ik, jk), _) in &atlas.changes {
    let (i, j) = (IndexSet(ik), IndexSet(jk));
    let cc = atlas.change(i, j).unwrap();
    let entries: Vec<LiftEntry> = atlas
      .sample_tilde(i, j, opts.net, opts.seed)
      .into_iter()
      .map(|t| LiftEntry { rho_img: (cc.rho)(&t), tilde: t })
      .collect();
    if entries.is_empty() {
      return Err(KgError::Gluing(format!("empty seed net for change ({i}, {j})")));
    }
    cat.lift_nets.insert((ik, jk), entries);
  }

  for (&(ik, jk), _) in &atlas.changes {
    let (i, j) = (IndexSet(ik), IndexSet(jk));
    let diff = j.minus(&i);
    let de = atlas.obs.dim_of(diff);
    let emax = red.eps(i, red.kappa);
    let mut forward = Vec::new();
    let tildes = atlas.sample_tilde(i, j, opts.forward_sub, opts.seed + 21);
    let cc = atlas.change(i, j).unwrap();
    for (si, xt) in tildes.iter().enumerate() {
      let x_i = (cc.rho)(xt);
      for k in 0..opts.e_dirs {
        let e_full = if k == 0 {
          V::zeros(atlas.obs.total())
        } else {
          let cube = util::halton_cube(si * opts.e_dirs + k, de, opts.seed + 22);
          let mag = 0.3 + 0.55 * (k as f64 - 1.0) / (opts.e_dirs.max(2) as f64 - 1.0);
          let flat = V::from_iterator(de, cube.iter().map(|c| (c - 0.5) * 2.0 * mag * emax));
          atlas.obs.scatter(&flat, diff)
        };
        if let Ok((mp, lift)) = cat.alpha_seeded(i, j, &e_full, &x_i, Some(xt)) {
          forward.push(ForwardEntry { e: e_full, x_i: x_i.clone(), out_x: mp.x, lift });
        }
      }
    }
    if forward.is_empty() {
      return Err(KgError::Gluing(format!("could not seed chart embedding for ({i}, {j})")));
    }
    cat.forward_nets.insert((ik, jk), forward);
  }

  Ok(cat)
}

impl<'a> Category<'a> {
  /// Group action on a thickened chart point.
  pub fn act_m(&self, g: &Gel, m: &MPoint) -> MPoint {
    MPoint {
      index: m.index,
      e: self.atlas.groups.act_e(&self.atlas.obs, g, &m.e),
      x: (self.atlas.chart(m.index).act)(g, &m.x),
    }
  }

  /// Membership in the level-m thickened chart domain.
  pub fn m_contains(&self, m: &MPoint, level: usize) -> bool {
    self.red.v_contains(self.atlas, m.index, &m.x)
      && self.atlas.obs.sup_norm(&m.e, self.atlas.full_minus(m.index))
        <= self.red.eps(m.index, level)
  }

  /// Lift a point of U_I to the zero locus of s_{J\I} inside U_J, inverting
  /// the coordinate change. The covering branch is fixed by the Newton seed
  /// (nearest cached net point unless one is supplied).
  pub fn phi_lift(&self, i: IndexSet, j: IndexSet, x: &V, seed: Option<&V>) -> Result<V> {
    let cc = self
      .atlas
      .change(i, j)
      .ok_or_else(|| KgError::Gluing(format!("missing coordinate change ({i}, {j})")))?;
    let net = &self.lift_nets[&(i.key(), j.key())];
    let seed_pt = match seed {
      Some(s) => s.clone(),
      None => {
        net
          .iter()
          .min_by(|a, b| {
            let da = (&a.rho_img - x).norm();
            let db = (&b.rho_img - x).norm();
            da.partial_cmp(&db).unwrap()
          })
          .unwrap()
          .tilde
          .clone()
      }
    };
    let diff = j.minus(&i);
    let du = x.len();
    let de = self.atlas.obs.dim_of(diff);
    let f = |xt: &V| {
      let rho = (cc.rho)(xt);
      let s = self.atlas.obs.flatten(&self.atlas.section_at(j, xt), diff);
      let mut out = V::zeros(du + de);
      for k in 0..du {
        out[k] = rho[k] - x[k];
      }
      for k in 0..de {
        out[du + k] = s[k];
      }
      out
    };
    let res = util::newton(f, &seed_pt, 1e-14, 100)
      .ok_or_else(|| KgError::Gluing(format!("lift ({i}, {j}) did not converge")))?;
    if !(self.atlas.chart(j).contains)(&res.x) {
      return Err(KgError::Gluing(format!("lift ({i}, {j}) left the chart domain")));
    }
    Ok(res.x)
  }

  /// Active chain for an embedding into chart J at a point with footprint p:
  /// strict intermediate sets with positive cutoff, then J itself. The sets
  /// must be totally ordered (guaranteed when the reduction separates
  /// incomparable charts).
  fn active_chain(&self, i: IndexSet, j: IndexSet, p: &V) -> Result<Vec<IndexSet>> {
    let mut chain: Vec<IndexSet> = self
      .atlas
      .poset
      .iter()
      .copied()
      .filter(|h| i.is_subset(h) && *h != i && h.is_subset(&j) && *h != j)
      .filter(|h| self.red.chi(self.atlas, *h, p) > 0.0)
      .collect();
    chain.sort_by_key(|h| h.len());
    chain.push(j);
    for w in chain.windows(2) {
      if !w[0].is_subset(&w[1]) {
        return Err(KgError::Gluing(format!(
          "active sets {} and {} are not nested",
          w[0], w[1]
        )));
      }
    }
    Ok(chain)
  }

  /// Chart embedding alpha_{I,J} with explicit branch seed for the lift.
  /// Returns the image point and the lift used (for reuse as a later seed).
  pub fn alpha_seeded(
    &self,
    i: IndexSet,
    j: IndexSet,
    e: &V,
    x: &V,
    lift_seed: Option<&V>,
  ) -> Result<(MPoint, V)> {
    let lift = self.phi_lift(i, j, x, lift_seed)?;
    let p = self.atlas.base_at(j, &lift);
    let chain = self.active_chain(i, j, &p)?;
    let chis: Vec<f64> =
      chain.iter().map(|h| self.red.chi(self.atlas, *h, &p)).collect();
    let mut prev = i;
    let mut a = Vec::new();
    for h in &chain {
      a.push(self.atlas.obs.sup_norm(e, h.minus(&prev)).sqrt());
      prev = *h;
    }
    let mut y = thickening::iota_ev(self.atlas, j, i, e, &lift);
    for n in 0..chain.len() {
      // collar length: the largest contribution among opened directions,
      // damped by the cutoffs of the steps in between
      let mut best = 0.0f64;
      for m in 0..=n {
        let lambda: f64 = (m..n).map(|l| 1.0 - chis[l]).product();
        best = best.max(lambda * a[m]);
      }
      let r = chis[n] * best;
      y = collar_step(self.atlas, &y, chain[n], r)?;
    }
    let (_, e_out, x_out) = thickening::project_m(self.atlas, &y);
    Ok((MPoint { index: j, e: e_out, x: x_out }, lift))
  }

  pub fn alpha(&self, i: IndexSet, j: IndexSet, m: &MPoint) -> Result<MPoint> {
    self.alpha_seeded(i, j, &m.e, &m.x, None).map(|t| t.0)
  }

  /// Transition functor tau_{I,J}: invert the chart embedding on a point of
  /// M_J, searching over group translates (identity first). The free
  /// obstruction coordinates outside J pass through unchanged.
  pub fn tau(&self, i: IndexSet, j: IndexSet, m: &MPoint) -> Result<MPoint> {
    let net = self
      .forward_nets
      .get(&(i.key(), j.key()))
      .ok_or_else(|| KgError::Gluing(format!("no embedding net for ({i}, {j})")))?;
    let diff = j.minus(&i);
    let de = self.atlas.obs.dim_of(diff);
    let du_i = self.atlas.chart(i).dim;
    let du_j = self.atlas.chart(j).dim;
    for g in self.atlas.groups.elements_of(self.atlas.full()) {
      let ginv = self.atlas.groups.inverse(&g);
      let mg = self.act_m(&ginv, m);
      let mut order: Vec<&ForwardEntry> = net.iter().collect();
      order.sort_by(|a, b| {
        let da = (&a.out_x - &mg.x).norm();
        let db = (&b.out_x - &mg.x).norm();
        da.partial_cmp(&db).unwrap()
      });
      // the embedding flattens as the free coordinates shrink (square-root
      // collar profile), so a single seed can stall; try a few nearby ones
      for entry in order.iter().take(4) {
        let f = |xi: &V| {
          let flat = V::from_iterator(de, (0..de).map(|k| xi[k]));
          let e_full = self.atlas.obs.scatter(&flat, diff);
          let x_i = V::from_iterator(du_i, (0..du_i).map(|k| xi[de + k]));
          match self.alpha_seeded(i, j, &e_full, &x_i, Some(&entry.lift)) {
            Ok((mp, _)) => &mp.x - &mg.x,
            Err(_) => V::from_element(du_j, 1e6),
          }
        };
        let mut seed = V::zeros(de + du_i);
        let flat = self.atlas.obs.flatten(&entry.e, diff);
        for k in 0..de {
          seed[k] = flat[k];
        }
        for k in 0..du_i {
          seed[de + k] = entry.x_i[k];
        }
        let Some(res) = util::newton(&f, &seed, 1e-12, 100) else { continue };
        let flat = V::from_iterator(de, (0..de).map(|k| res.x[k]));
        let x_i = V::from_iterator(du_i, (0..du_i).map(|k| res.x[de + k]));
        if !(self.atlas.chart(i).contains)(&x_i) {
          continue;
        }
        let mut e = self.atlas.obs.scatter(&flat, diff);
        e += self.atlas.obs.project(&mg.e, self.atlas.full_minus(j));
        let mut out = self.act_m(&g, &MPoint { index: i, e, x: x_i });
        if self.atlas.mutation == Mutation::BrokenTauInverse {
          out.x[0] += 0.002;
        }
        return Ok(out);
      }
    }
    Err(KgError::Gluing(format!("tau ({i}, {j}): no preimage found")))
  }

  /// All branch images of a point of M_I in M_J: translate by the factor
  /// group of the new directions, embed with a shared branch seed, translate
  /// back.
  pub fn tau_fiber(&self, i: IndexSet, j: IndexSet, m: &MPoint) -> Result<Vec<MPoint>> {
    let (first, lift) = self.alpha_seeded(i, j, &m.e, &m.x, None)?;
    let mut out = vec![first];
    for g in self.atlas.groups.elements_of(j.minus(&i)) {
      if self.atlas.groups.is_identity(&g) {
        continue;
      }
      let ginv = self.atlas.groups.inverse(&g);
      let mg = self.act_m(&ginv, m);
      if let Ok((mp, _)) = self.alpha_seeded(i, j, &mg.e, &mg.x, Some(&lift)) {
        let cand = self.act_m(&g, &MPoint { index: j, ..mp });
        if !out.iter().any(|o| (&o.x - &cand.x).norm() < 1e-6) {
          out.push(cand);
        }
      }
    }
    Ok(out)
  }

  /// Branch weight at a point of M_I: 1 / |Gamma_H| for the smallest proper
  /// subset H whose chart reaches the point (closure membership probed by
  /// inverting the embedding, with a small positional fuzz), else
  /// 1 / |Gamma_I|.
  pub fn weight(&self, m: &MPoint) -> Rational64 {
    let i = m.index;
    let mut best: Option<usize> = None;
    for h in &self.atlas.poset {
      if !(h.is_subset(&i) && *h != i) || self.atlas.change(*h, i).is_none() {
        continue;
      }
      // a chart reaches the point only if the inverted embedding lands in its
      // reduced domain, not merely in the raw overlap
      let lands = |mh: &MPoint| self.red.v_contains(self.atlas, *h, &mh.x);
      let mut reached = self.tau(*h, i, m).map_or(false, |mh| lands(&mh));
      if !reached {
        for k in 0..6 {
          let mut fuzzed = m.clone();
          let dir = util::halton_cube(k, m.x.len(), 77);
          for d in 0..m.x.len() {
            fuzzed.x[d] += (dir[d] - 0.5) * 1e-3;
          }
          if self.tau(*h, i, &fuzzed).map_or(false, |mh| lands(&mh)) {
            reached = true;
            break;
          }
        }
      }
      if reached {
        let o = self.atlas.groups.order_of(*h);
        best = Some(best.map_or(o, |b| b.min(o)));
      }
    }
    let den = best.unwrap_or_else(|| self.atlas.groups.order_of(i));
    Rational64::new(1, den as i64)
  }

  /// Single-chart section value as a full obstruction vector: the free
  /// coordinates plus the section of the chart.
  fn sprime(&self, m: &MPoint) -> V {
    self.atlas.obs.project(&m.e, self.atlas.full_minus(m.index))
      + self.atlas.section_at(m.index, &m.x)
  }

  /// Glued section on M_I: a telescoped blend over the active supersets,
  /// pushing the point into each active larger chart before reading off the
  /// section there. Coefficients form a partition of unity; wherever the
  /// largest active cutoff saturates, the value equals the pushed-forward
  /// section exactly.
  pub fn s_value(&self, m: &MPoint) -> Result<V> {
    let i = m.index;
    let p = self.atlas.base_at(i, &m.x);
    let mut ups: Vec<IndexSet> = self
      .atlas
      .poset
      .iter()
      .copied()
      .filter(|h| i.is_subset(h) && *h != i && self.atlas.change(i, *h).is_some())
      .filter(|h| self.red.chi(self.atlas, *h, &p) > 0.0)
      .collect();
    ups.sort_by_key(|h| h.len());
    for w in ups.windows(2) {
      if !w[0].is_subset(&w[1]) {
        return Err(KgError::Gluing(format!(
          "active sets {} and {} above {} are not nested",
          w[0], w[1], i
        )));
      }
    }
    let chis: Vec<f64> = ups.iter().map(|h| self.red.chi(self.atlas, *h, &p)).collect();
    let mut out = V::zeros(self.atlas.obs.total());
    let mut tail = 1.0;
    for n in (0..ups.len()).rev() {
      let c = chis[n] * tail;
      if c > 0.0 {
        let a = self.alpha(i, ups[n], m)?;
        out += c * self.sprime(&a);
      }
      tail *= 1.0 - chis[n];
    }
    if tail > 0.0 {
      out += tail * self.sprime(m);
    }
    Ok(out)
  }

  /// Consistency checks of the glued structure.
  pub fn check_category(&self, opts: &GluingOpts) -> Result<Report> {
    let mut checks = Vec::new();

    // invert-embed roundtrip and section compatibility across charts
    let mut worst_inv = 0.0f64;
    let mut worst_round = 0.0f64;
    let mut worst_s = 0.0f64;
    let mut n = 0;
    let mut ns = 0;
    let gels = self.atlas.groups.elements_of(self.atlas.full());
    for (&(ik, jk), net) in &self.forward_nets {
      let (i, j) = (IndexSet(ik), IndexSet(jk));
      let step = (net.len() / opts.check_samples.max(1)).max(1);
      for entry in net.iter().step_by(step) {
        let m = MPoint { index: i, e: entry.e.clone(), x: entry.x_i.clone() };
        let a = MPoint { index: j, e: V::zeros(self.atlas.obs.total()), x: entry.out_x.clone() };
        match self.tau(i, j, &a) {
          Ok(t) => {
            // the inverse must embed back onto the same point. The preimage
            // is only defined up to the group, and the embedding is branch-
            // resolved, so search for the branch pairing that closes the loop.
            let mut best = (f64::INFINITY, 0usize);
            for (hi, h) in gels.iter().enumerate() {
              let th = self.act_m(h, &t);
              let Ok(back) = self.alpha(i, j, &th) else { continue };
              let d = gels
                .iter()
                .map(|g| (&self.act_m(g, &back).x - &a.x).norm())
                .fold(f64::INFINITY, f64::min);
              if d < best.0 {
                best = (d, hi);
              }
              if best.0 <= opts.tol {
                break;
              }
            }
            worst_inv = worst_inv.max(best.0.min(1.0));
            // where the target cutoff saturates the identification of the
            // free coordinates is honest (and well-conditioned): the inverse
            // must agree with the original preimage up to the group, and the
            // glued sections must agree across the transition. Inside the
            // interpolation collar only the base points are compared.
            let p = self.atlas.base_at(j, &a.x);
            if self.red.chi(self.atlas, j, &p) >= 1.0 {
              let d = gels
                .iter()
                .map(|g| {
                  let gm = self.act_m(g, &t);
                  (&gm.x - &m.x).norm() + (&gm.e - &m.e).norm()
                })
                .fold(f64::INFINITY, f64::min);
              worst_round = worst_round.max(d);
              let th = self.act_m(&gels[best.1], &t);
              match (self.s_value(&th), self.s_value(&a)) {
                (Ok(si), Ok(sj)) => {
                  let d = gels
                    .iter()
                    .map(|g| (self.atlas.groups.act_e(&self.atlas.obs, g, &si) - &sj).norm())
                    .fold(f64::INFINITY, f64::min);
                  worst_s = worst_s.max(d);
                }
                _ => worst_s = worst_s.max(1.0),
              }
              ns += 1;
            }
          }
          Err(_) => worst_inv = worst_inv.max(1.0),
        }
        n += 1;
      }
    }
    checks.push(CheckResult::new("transition-inverts-embedding", n, worst_inv, opts.tol));
    checks.push(CheckResult::new("transition-roundtrip", ns, worst_round, opts.tol));
    checks.push(CheckResult::new("glued-section-compatibility", ns, worst_s, opts.tol));

    // composition across nested triples
    {
      let mut worst = 0.0f64;
      let mut nc = 0;
      for i in &self.atlas.poset {
        for j in &self.atlas.poset {
          for k in &self.atlas.poset {
            if !(i.is_subset(j) && j.is_subset(k) && i != j && j != k) {
              continue;
            }
            let Some(net) = self.forward_nets.get(&(i.key(), k.key())) else { continue };
            let step = (net.len() / opts.check_samples.max(1)).max(1);
            for entry in net.iter().step_by(step) {
              let a =
                MPoint { index: *k, e: V::zeros(self.atlas.obs.total()), x: entry.out_x.clone() };
              // inverting either leg is only well-conditioned where the
              // cutoffs of both larger charts saturate
              let p = self.atlas.base_at(*k, &a.x);
              if self.red.chi(self.atlas, *j, &p) < 1.0
                || self.red.chi(self.atlas, *k, &p) < 1.0
              {
                continue;
              }
              let direct = self.tau(*i, *k, &a);
              let via = self.tau(*j, *k, &a).and_then(|t| self.tau(*i, *j, &t));
              match (direct, via) {
                (Ok(d), Ok(v)) => {
                  let dist = gels
                    .iter()
                    .map(|g| {
                      let gv = self.act_m(g, &v);
                      (&gv.x - &d.x).norm() + (&gv.e - &d.e).norm()
                    })
                    .fold(f64::INFINITY, f64::min);
                  worst = worst.max(dist);
                }
                _ => worst = worst.max(1.0),
              }
              nc += 1;
            }
          }
        }
      }
      checks.push(CheckResult::new("transition-composition", nc, worst, opts.tol));
    }

    // every branch image maps back under the transition
    {
      let mut worst = 0.0f64;
      let mut nf = 0;
      for (&(ik, jk), net) in &self.forward_nets {
        let (i, j) = (IndexSet(ik), IndexSet(jk));
        let step = (net.len() / (opts.check_samples / 2).max(1)).max(1);
        for entry in net.iter().step_by(step) {
          let m = MPoint { index: i, e: entry.e.clone(), x: entry.x_i.clone() };
          match self.tau_fiber(i, j, &m) {
            Ok(fiber) => {
              for fp in &fiber {
                match self.tau(i, j, fp) {
                  Ok(t) => {
                    let d = gels
                      .iter()
                      .map(|g| {
                        let gm = self.act_m(g, &t);
                        (&gm.x - &m.x).norm()
                      })
                      .fold(f64::INFINITY, f64::min);
                    worst = worst.max(d);
                  }
                  Err(_) => worst = worst.max(1.0),
                }
              }
            }
            Err(_) => worst = worst.max(1.0),
          }
          nf += 1;
        }
      }
      checks.push(CheckResult::new("branch-images-map-back", nf, worst, opts.tol));
    }

    let report = Report::new("glue", &self.atlas.name, checks);
    if !report.pass {
      let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} (residual {:.3e})", c.name, c.max_residual))
        .collect();
      return Err(KgError::Gluing(format!("checks failed: {}", failed.join(", "))));
    }
    Ok(report)
  }
}
