//! Core data model for finite-dimensional Kuranishi atlases: index sets,
//! obstruction-space layout, finite group actions, charts given by global
//! parametrizations, coordinate changes, local product structures, and the
//! sampling-based axiom validator.

use std::collections::HashMap;

use crate::error::{KgError, Result};
use crate::report::{CheckResult, Report};
use crate::util::{self, V};

/// Subset of basic chart indices, stored as a bitset (index 0 = chart "1").
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(pub u32);

impl IndexSet {
  pub fn empty() -> Self {
    IndexSet(0)
  }
  pub fn full(n: usize) -> Self {
    IndexSet((1u32 << n) - 1)
  }
  pub fn singleton(i: usize) -> Self {
    IndexSet(1 << i)
  }
  pub fn from_slice(s: &[usize]) -> Self {
    IndexSet(s.iter().fold(0, |a, &i| a | (1 << i)))
  }
  pub fn contains(&self, i: usize) -> bool {
    self.0 & (1 << i) != 0
  }
  pub fn len(&self) -> usize {
    self.0.count_ones() as usize
  }
  pub fn is_empty(&self) -> bool {
    self.0 == 0
  }
  pub fn is_subset(&self, other: &IndexSet) -> bool {
    self.0 & !other.0 == 0
  }
  pub fn union(&self, other: &IndexSet) -> IndexSet {
    IndexSet(self.0 | other.0)
  }
  pub fn minus(&self, other: &IndexSet) -> IndexSet {
    IndexSet(self.0 & !other.0)
  }
  pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
    (0..32).filter(move |i| self.contains(*i))
  }
  pub fn min_index(&self) -> Option<usize> {
    self.iter().next()
  }
  pub fn key(&self) -> u32 {
    self.0
  }
}

impl std::fmt::Debug for IndexSet {
  fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    write!(f, "{}", self)
  }
}

impl std::fmt::Display for IndexSet {
  fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    // displayed 1-based, e.g. {1,2}
    let items: Vec<String> = self.iter().map(|i| (i + 1).to_string()).collect();
    write!(f, "{{{}}}", items.join(","))
  }
}

/// Layout of E_A = prod_i E_i. Vectors over E_A are stored flat in index order.
#[derive(Clone, Debug)]
pub struct Obstruction {
  pub dims: Vec<usize>,
}

impl Obstruction {
  pub fn offset(&self, i: usize) -> usize {
    self.dims[..i].iter().sum()
  }
  pub fn total(&self) -> usize {
    self.dims.iter().sum()
  }
  pub fn dim_of(&self, set: IndexSet) -> usize {
    set.iter().map(|i| self.dims[i]).sum()
  }
  /// Euclidean norm of the E_i component.
  pub fn comp_norm(&self, e: &V, i: usize) -> f64 {
    let o = self.offset(i);
    (0..self.dims[i]).map(|k| e[o + k] * e[o + k]).sum::<f64>().sqrt()
  }
  /// sup-style norm over the components in `set`: max_i |e_i|.
  pub fn sup_norm(&self, e: &V, set: IndexSet) -> f64 {
    set.iter().map(|i| self.comp_norm(e, i)).fold(0.0, f64::max)
  }
  /// Zero out all components outside `set`.
  pub fn project(&self, e: &V, set: IndexSet) -> V {
    let mut out = e.clone();
    for i in 0..self.dims.len() {
      if !set.contains(i) {
        let o = self.offset(i);
        for k in 0..self.dims[i] {
          out[o + k] = 0.0;
        }
      }
    }
    out
  }
  pub fn get_comp(&self, e: &V, i: usize) -> V {
    let o = self.offset(i);
    V::from_iterator(self.dims[i], (0..self.dims[i]).map(|k| e[o + k]))
  }
  pub fn set_comp(&self, e: &mut V, i: usize, val: &V) {
    let o = self.offset(i);
    for k in 0..self.dims[i] {
      e[o + k] = val[k];
    }
  }
  /// Flatten the components of `set` (in index order) into one short vector.
  pub fn flatten(&self, e: &V, set: IndexSet) -> V {
    let mut vals = Vec::new();
    for i in set.iter() {
      let o = self.offset(i);
      for k in 0..self.dims[i] {
        vals.push(e[o + k]);
      }
    }
    V::from_vec(vals)
  }
  /// Inverse of `flatten`: scatter a short vector into an E_A vector.
  pub fn scatter(&self, flat: &V, set: IndexSet) -> V {
    let mut out = V::zeros(self.total());
    let mut c = 0;
    for i in set.iter() {
      let o = self.offset(i);
      for k in 0..self.dims[i] {
        out[o + k] = flat[c];
        c += 1;
      }
    }
    out
  }
}

/// Group element of Gamma_A = prod_i Z/(orders[i]); one entry per basic index.
pub type Gel = Vec<usize>;

/// Product of cyclic groups, one factor per basic chart, with linear
/// representations on the obstruction factors.
#[derive(Clone)]
pub struct Groups {
  pub orders: Vec<usize>,
  /// e_reps[i][g] is the matrix of element g of factor i on E_i.
  pub e_reps: Vec<Vec<util::M>>,
}

impl Groups {
  pub fn trivial(n: usize, obs: &Obstruction) -> Self {
    Groups {
      orders: vec![1; n],
      e_reps: (0..n).map(|i| vec![util::M::identity(obs.dims[i], obs.dims[i])]).collect(),
    }
  }

  pub fn identity(&self) -> Gel {
    vec![0; self.orders.len()]
  }
  pub fn is_identity(&self, g: &Gel) -> bool {
    g.iter().all(|&a| a == 0)
  }
  pub fn inverse(&self, g: &Gel) -> Gel {
    g.iter().zip(&self.orders).map(|(&a, &o)| (o - a) % o).collect()
  }
  pub fn compose(&self, g: &Gel, h: &Gel) -> Gel {
    g.iter().zip(h).zip(&self.orders).map(|((&a, &b), &o)| (a + b) % o).collect()
  }
  pub fn order_of(&self, set: IndexSet) -> usize {
    set.iter().map(|i| self.orders[i]).product::<usize>().max(1)
  }
  /// All elements supported on `set` (identity in the other factors).
  pub fn elements_of(&self, set: IndexSet) -> Vec<Gel> {
    let mut out = vec![self.identity()];
    for i in set.iter() {
      let mut next = Vec::new();
      for g in &out {
        for a in 0..self.orders[i] {
          let mut h = g.clone();
          h[i] = a;
          next.push(h);
        }
      }
      out = next;
    }
    out
  }
  /// Action on a full E_A vector, factor by factor.
  pub fn act_e(&self, obs: &Obstruction, g: &Gel, e: &V) -> V {
    let mut out = e.clone();
    for i in 0..self.orders.len() {
      if g[i] != 0 {
        let comp = obs.get_comp(e, i);
        let rotated = &self.e_reps[i][g[i]] * comp;
        obs.set_comp(&mut out, i, &rotated);
      }
    }
    out
  }
}

pub type MapFn = Box<dyn Fn(&V) -> V + Send + Sync>;
pub type PredFn = Box<dyn Fn(&V) -> bool + Send + Sync>;
pub type ActFn = Box<dyn Fn(&Gel, &V) -> V + Send + Sync>;
pub type PhiFn = Box<dyn Fn(&V, &V) -> V + Send + Sync>;
pub type ScalarFn = Box<dyn Fn(&V) -> f64 + Send + Sync>;
pub type SamplerFn = Box<dyn Fn(&[f64]) -> V + Send + Sync>;

/// A Kuranishi chart given in global parameter coordinates: an open subset of
/// R^dim described by a bounding box plus membership predicate, together with
/// the section (E_A-valued, supported on `index`), the base-point map to the
/// underlying space X (extending the footprint map off the zero set), and the
/// group action in parameter coordinates.
pub struct Chart {
  pub index: IndexSet,
  pub dim: usize,
  pub bbox: Vec<(f64, f64)>,
  pub contains: PredFn,
  pub section: MapFn,
  pub base: MapFn,
  pub act: ActFn,
  pub orientation_sign: f64,
}

/// Coordinate change rho_IJ: Utilde_IJ (subset of U_J) -> U_I, plus a sampler
/// of Utilde_IJ used to seed local inverses.
pub struct CoordChange {
  pub small: IndexSet,
  pub big: IndexSet,
  pub rho: MapFn,
  pub tilde_sampler: SamplerFn,
  pub tilde_sampler_dim: usize,
}

/// Local product structure phi^E_{I,K}: (e_{K\I}, y) -> U_K with
/// s_{K\I}(phi(e,y)) = e and phi(0,y) = y; e is passed in E_A layout.
pub struct ProductStructure {
  pub small: IndexSet,
  pub big: IndexSet,
  pub eps: f64,
  pub phi: Box<dyn Fn(&V, &V) -> V + Send + Sync>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mutation {
  None,
  BrokenCocycle,
  BrokenSectionCompat,
  OversizedEpsilon,
  BrokenTauInverse,
}

pub struct Atlas {
  pub name: String,
  pub n_basic: usize,
  pub d: i64,
  pub obs: Obstruction,
  pub groups: Groups,
  pub poset: Vec<IndexSet>,
  pub charts: HashMap<u32, Chart>,
  pub changes: HashMap<(u32, u32), CoordChange>,
  pub prods: HashMap<(u32, u32), ProductStructure>,
  pub x_dim: usize,
  pub x_sampler: Box<dyn Fn(usize, u64) -> V + Send + Sync>,
  /// Footprint strengths g_i on X; used by the reduction's score functions.
  pub strengths: Vec<ScalarFn>,
  /// Unscaled transverse perturbation template per chart, in the full
  /// obstruction layout; the counting pass multiplies it by a magnitude.
  pub nu: Box<dyn Fn(IndexSet, &V) -> V + Send + Sync>,
  /// Strictly decreasing cutoff ladder, one entry per level plus a floor:
  /// margins[l-1] is the score threshold defining the reduced set at level l,
  /// margins[l] is where the level-l cutoff function reaches zero.
  pub margins: Vec<f64>,
  pub mutation: Mutation,
}

impl Atlas {
  pub fn chart(&self, i: IndexSet) -> &Chart {
    &self.charts[&i.key()]
  }
  pub fn change(&self, i: IndexSet, j: IndexSet) -> Option<&CoordChange> {
    self.changes.get(&(i.key(), j.key()))
  }
  pub fn prod(&self, i: IndexSet, j: IndexSet) -> Option<&ProductStructure> {
    self.prods.get(&(i.key(), j.key()))
  }
  pub fn full(&self) -> IndexSet {
    IndexSet::full(self.n_basic)
  }
  pub fn full_minus(&self, i: IndexSet) -> IndexSet {
    self.full().minus(&i)
  }
  pub fn section_at(&self, i: IndexSet, x: &V) -> V {
    (self.chart(i).section)(x)
  }
  pub fn base_at(&self, i: IndexSet, x: &V) -> V {
    (self.chart(i).base)(x)
  }
  pub fn strength(&self, i: usize, xp: &V) -> f64 {
    (self.strengths[i])(xp)
  }

  /// Halton samples of the chart domain (parameter coordinates).
  pub fn sample_chart(&self, i: IndexSet, n: usize, seed: u64) -> Vec<V> {
    let ch = self.chart(i);
    let mut out = Vec::new();
    let mut idx = 0usize;
    while out.len() < n && idx < n * 60 {
      let x = util::halton_in_box(idx, &ch.bbox, seed);
      if (ch.contains)(&x) {
        out.push(x);
      }
      idx += 1;
    }
    out
  }

  /// Halton samples of Utilde_IJ via the coordinate-change sampler.
  pub fn sample_tilde(&self, i: IndexSet, j: IndexSet, n: usize, seed: u64) -> Vec<V> {
    let cc = match self.change(i, j) {
      Some(cc) => cc,
      None => return Vec::new(),
    };
    (0..n)
      .map(|k| (cc.tilde_sampler)(&util::halton_cube(k, cc.tilde_sampler_dim, seed)))
      .collect()
  }
}

pub struct ValidateOpts {
  pub tol: f64,
  pub samples: usize,
  pub seed: u64,
}

impl Default for ValidateOpts {
  fn default() -> Self {
    ValidateOpts { tol: 1e-9, samples: 200, seed: 1 }
  }
}

/// Numerically validate the atlas axioms by deterministic sampling.
pub fn validate_atlas(atlas: &Atlas, opts: &ValidateOpts) -> Report {
  let mut checks = Vec::new();
  let obs = &atlas.obs;

  // dimension bookkeeping: dim U_I - dim E_I = d for every chart
  {
    let mut bad = Vec::new();
    for i in &atlas.poset {
      let ch = atlas.chart(*i);
      if ch.dim as i64 - obs.dim_of(*i) as i64 != atlas.d {
        bad.push(format!("{}", i));
      }
    }
    let res = if bad.is_empty() { 0.0 } else { 1.0 };
    let mut c = CheckResult::new("chart-dimensions", atlas.poset.len(), res, 0.5);
    if !bad.is_empty() {
      c = c.with_detail(format!("bad charts: {}", bad.join(" ")));
    }
    checks.push(c);
  }

  // section support: s_I lands in E_I
  {
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in &atlas.poset {
      for x in atlas.sample_chart(*i, opts.samples / 2, opts.seed) {
        let s = atlas.section_at(*i, &x);
        worst = worst.max(obs.sup_norm(&s, atlas.full().minus(i)));
        n += 1;
      }
    }
    checks.push(CheckResult::new("section-support", n, worst, opts.tol));
  }

  // group action: domain closure, section equivariance, base invariance
  {
    let mut worst = 0.0f64;
    let mut closure_fail = 0usize;
    let mut n = 0;
    for i in &atlas.poset {
      let ch = atlas.chart(*i);
      let gels = atlas.groups.elements_of(*i);
      if gels.len() == 1 {
        continue;
      }
      for x in atlas.sample_chart(*i, opts.samples / 2, opts.seed + 7) {
        for g in &gels {
          let gx = (ch.act)(g, &x);
          if !(ch.contains)(&gx) {
            closure_fail += 1;
          }
          let lhs = atlas.section_at(*i, &gx);
          let rhs = atlas.groups.act_e(obs, g, &atlas.section_at(*i, &x));
          worst = worst.max((lhs - rhs).norm());
          worst = worst.max((atlas.base_at(*i, &gx) - atlas.base_at(*i, &x)).norm());
          n += 1;
        }
      }
    }
    let mut c = CheckResult::new("group-equivariance", n, worst, opts.tol);
    if closure_fail > 0 {
      c.pass = false;
      c = c.with_detail(format!("{closure_fail} samples left the domain under the action"));
    }
    checks.push(c);
  }

  // coordinate changes: tameness (s_{J\I} = 0 on Utilde), section compatibility
  // s_J|_{E_I} = s_I o rho, footprint compatibility of base points
  {
    let mut worst_tame = 0.0f64;
    let mut worst_sect = 0.0f64;
    let mut worst_base = 0.0f64;
    let mut n = 0;
    for ((ik, jk), cc) in &atlas.changes {
      let (i, j) = (IndexSet(*ik), IndexSet(*jk));
      for xt in atlas.sample_tilde(i, j, opts.samples, opts.seed + 11) {
        let sj = atlas.section_at(j, &xt);
        worst_tame = worst_tame.max(obs.sup_norm(&sj, j.minus(&i)));
        let xi = (cc.rho)(&xt);
        let si = atlas.section_at(i, &xi);
        worst_sect = worst_sect.max(obs.sup_norm(&(obs.project(&sj, i) - si), i));
        worst_base = worst_base.max((atlas.base_at(j, &xt) - atlas.base_at(i, &xi)).norm());
        n += 1;
      }
    }
    checks.push(CheckResult::new("tameness", n, worst_tame, opts.tol));
    checks.push(CheckResult::new("section-compatibility", n, worst_sect, opts.tol));
    checks.push(CheckResult::new("footprint-compatibility", n, worst_base, opts.tol));
  }

  // cocycle condition rho_IK = rho_IJ o rho_JK on sampled Utilde_IK
  {
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in &atlas.poset {
      for j in &atlas.poset {
        for k in &atlas.poset {
          if !(i.is_subset(j) && j.is_subset(k) && i != j && j != k) {
            continue;
          }
          let (Some(cik), Some(cij), Some(cjk)) =
            (atlas.change(*i, *k), atlas.change(*i, *j), atlas.change(*j, *k))
          else {
            continue;
          };
          for xt in atlas.sample_tilde(*i, *k, opts.samples, opts.seed + 13) {
            let direct = (cik.rho)(&xt);
            let via = (cij.rho)(&(cjk.rho)(&xt));
            worst = worst.max((direct - via).norm());
            n += 1;
          }
        }
      }
    }
    checks.push(CheckResult::new("cocycle", n, worst, opts.tol));
  }

  // product structures: phi(0,y) = y, s_{K\I} o phi = e, equivariance
  {
    let mut worst_id = 0.0f64;
    let mut worst_sub = 0.0f64;
    let mut worst_eq = 0.0f64;
    let mut n = 0;
    for ((ik, kk), ps) in &atlas.prods {
      let (i, k) = (IndexSet(*ik), IndexSet(*kk));
      let chk = atlas.chart(k);
      let diff = k.minus(&i);
      let ed = obs.dim_of(diff);
      let gels = atlas.groups.elements_of(k);
      for (si, y) in atlas.sample_tilde(i, k, opts.samples, opts.seed + 17).iter().enumerate() {
        worst_id = worst_id.max(((ps.phi)(&V::zeros(obs.total()), y) - y).norm());
        let cube = util::halton_cube(si, ed, opts.seed + 19);
        let flat = V::from_iterator(ed, cube.iter().map(|c| (c - 0.5) * ps.eps));
        let e = obs.scatter(&flat, diff);
        let x = (ps.phi)(&e, y);
        let s = atlas.section_at(k, &x);
        worst_sub = worst_sub.max((obs.project(&s, diff) - &e).norm());
        if gels.len() > 1 {
          let g = &gels[si % gels.len()];
          let lhs = (ps.phi)(&atlas.groups.act_e(obs, g, &e), &(chk.act)(g, y));
          let rhs = (chk.act)(g, &x);
          worst_eq = worst_eq.max((lhs - rhs).norm());
        }
        n += 1;
      }
    }
    checks.push(CheckResult::new("product-identity-at-zero", n, worst_id, opts.tol));
    checks.push(CheckResult::new("product-section-splitting", n, worst_sub, opts.tol));
    checks.push(CheckResult::new("product-equivariance", n, worst_eq, opts.tol));
  }

  Report::new("validate", &atlas.name, checks)
}

/// Validation as a hard gate.
pub fn require_valid(atlas: &Atlas, opts: &ValidateOpts) -> Result<Report> {
  let rep = validate_atlas(atlas, opts);
  if rep.pass {
    Ok(rep)
  } else {
    let failed: Vec<String> =
      rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    Err(KgError::Validation(format!("checks failed: {}", failed.join(", "))))
  }
}
