//! Reduction of an atlas: score functions built from footprint strengths,
//! the shrunken chart domains they define, smooth cutoff functions, and the
//! ladder of thickening radii compatible with the collar widths and the
//! domains of the local product structures.

use crate::atlas::{Atlas, IndexSet, Mutation};
use crate::error::{KgError, Result};
use crate::report::{CheckResult, Report};
use crate::util::{self, V};

/// A reduction together with the numerical thickening data.
pub struct Reduction {
  /// Copied from the atlas; see `Atlas::margins`.
  pub margins: Vec<f64>,
  /// Common collar width for every index set.
  pub w0: f64,
  /// Base thickening radius; the level ladder is derived from it.
  pub eps0: f64,
  /// Maximum index-set size (number of basic charts).
  pub kappa: usize,
}

impl Reduction {
  /// score_I = min_{i in I} g_i - max_{j not in I} g_j, a function on X.
  pub fn score(&self, atlas: &Atlas, i: IndexSet, xp: &V) -> f64 {
    let min_in = i.iter().map(|b| atlas.strength(b, xp)).fold(f64::INFINITY, f64::min);
    let max_out = (0..atlas.n_basic)
      .filter(|b| !i.contains(*b))
      .map(|b| atlas.strength(b, xp))
      .fold(0.0f64, f64::max);
    min_in - max_out
  }

  /// Smooth cutoff for chart I: 1 where score_I >= margins[|I|-1], 0 where
  /// score_I <= margins[|I|]. A function on X, hence group-invariant.
  pub fn chi(&self, atlas: &Atlas, i: IndexSet, xp: &V) -> f64 {
    let l = i.len();
    let hi = self.margins[l - 1];
    let lo = self.margins[l];
    util::smoothstep((self.score(atlas, i, xp) - lo) / (hi - lo))
  }

  /// Membership of a chart parameter point in the reduced domain V_I.
  pub fn v_contains(&self, atlas: &Atlas, i: IndexSet, x: &V) -> bool {
    (atlas.chart(i).contains)(x)
      && self.score(atlas, i, &atlas.base_at(i, x)) >= self.margins[i.len() - 1]
  }

  /// Thickening radius for index set I at level m (m = 1..=kappa).
  pub fn eps(&self, i: IndexSet, m: usize) -> f64 {
    let k = self.kappa as f64;
    self.eps0 * 1.5f64.powi(m as i32 - 1) / (2.0 * k).powi((self.kappa - i.len()) as i32)
  }

  /// Collar depth scale for I (the level-|I| radius).
  pub fn delta(&self, i: IndexSet) -> f64 {
    self.eps(i, i.len())
  }

  pub fn width(&self, _i: IndexSet) -> f64 {
    self.w0
  }
}

pub struct ReductionOpts {
  pub samples: usize,
  pub seed: u64,
  pub tol: f64,
  /// Factor applied to the base radius on each shrink round.
  pub shrink: f64,
  /// Safety fraction of the collar width the radii must stay under.
  pub eps_safety: f64,
}

impl Default for ReductionOpts {
  fn default() -> Self {
    ReductionOpts { samples: 400, seed: 2, tol: 1e-9, shrink: 0.5, eps_safety: 0.5 }
  }
}

/// Verify that the radius ladder fits under the collar widths and inside the
/// product-structure domains.
fn epsilons_ok(atlas: &Atlas, red: &Reduction, safety: f64) -> bool {
  let phi_bound = atlas.prods.values().map(|p| p.eps).fold(f64::INFINITY, f64::min);
  for i in &atlas.poset {
    for m in 1..=red.kappa {
      let e = red.eps(*i, m);
      if e.sqrt() > safety * red.w0 {
        return false;
      }
      if phi_bound.is_finite() && e >= 0.5 * phi_bound {
        return false;
      }
    }
  }
  true
}

/// Build the reduction: check that the shrunken domains cover the zero set,
/// that incomparable charts separate, and pick the thickening radii.
pub fn build_reduction(atlas: &Atlas, opts: &ReductionOpts) -> Result<(Reduction, Report)> {
  if atlas.margins.len() != atlas.n_basic + 1 {
    return Err(KgError::Reduction(format!(
      "margin ladder must have {} entries, got {}",
      atlas.n_basic + 1,
      atlas.margins.len()
    )));
  }
  if !atlas.margins.windows(2).all(|w| w[0] > w[1]) || *atlas.margins.last().unwrap() <= 0.0 {
    return Err(KgError::Reduction("margin ladder must be strictly decreasing and positive".into()));
  }

  let mut red = Reduction {
    margins: atlas.margins.clone(),
    w0: 0.05,
    eps0: 5e-4,
    kappa: atlas.n_basic,
  };

  let mut checks = Vec::new();

  // cover: every sampled point of X lies in some reduced domain
  {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..opts.samples {
      let xp = (atlas.x_sampler)(k, opts.seed);
      let best = atlas
        .poset
        .iter()
        .map(|i| red.score(atlas, *i, &xp) - red.margins[i.len() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
      // residual is how far the worst point is from being covered
      worst = worst.max(-best);
    }
    checks.push(CheckResult::new("reduced-domains-cover", opts.samples, worst.max(0.0), 0.0));
  }

  // separation: for incomparable I, J the scores cannot both be positive
  {
    let mut worst = 0.0f64;
    let mut n = 0;
    for a in 0..atlas.poset.len() {
      for b in (a + 1)..atlas.poset.len() {
        let (i, j) = (atlas.poset[a], atlas.poset[b]);
        if i.is_subset(&j) || j.is_subset(&i) {
          continue;
        }
        for k in 0..opts.samples {
          let xp = (atlas.x_sampler)(k, opts.seed + 3);
          worst = worst.max(red.score(atlas, i, &xp) + red.score(atlas, j, &xp));
          n += 1;
        }
      }
    }
    checks.push(CheckResult::new("incomparable-separation", n, worst.max(0.0), opts.tol));
  }

  // cutoff sanity: chi is 1 on the reduced set and supported below it
  {
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in &atlas.poset {
      for k in 0..opts.samples / 2 {
        let xp = (atlas.x_sampler)(k, opts.seed + 5);
        let s = red.score(atlas, *i, &xp);
        let c = red.chi(atlas, *i, &xp);
        if s >= red.margins[i.len() - 1] {
          worst = worst.max(1.0 - c);
        }
        if s <= red.margins[i.len()] {
          worst = worst.max(c);
        }
        n += 1;
      }
    }
    checks.push(CheckResult::new("cutoff-plateaus", n, worst, opts.tol));
  }

  // radius ladder: shrink eps0 until it fits, then confirm
  {
    let mut rounds = 0usize;
    if !(opts.shrink > 0.0 && opts.shrink < 1.0 && opts.eps_safety > 0.0) {
      return Err(KgError::Config("shrink factor must be in (0,1) and safety positive".into()));
    }
    while !epsilons_ok(atlas, &red, opts.eps_safety) {
      red.eps0 *= opts.shrink;
      rounds += 1;
      if rounds > 200 {
        return Err(KgError::Reduction("thickening radii cannot fit under collar widths".into()));
      }
    }
    if atlas.mutation == Mutation::OversizedEpsilon {
      red.eps0 *= 1e4;
    }
    let ok = epsilons_ok(atlas, &red, opts.eps_safety);
    checks.push(
      CheckResult::new("radius-ladder-fits", atlas.poset.len() * red.kappa, if ok { 0.0 } else { 1.0 }, 0.5)
        .with_detail(format!("eps0={:.3e} after {} shrink rounds, w0={}", red.eps0, rounds, red.w0)),
    );
  }

  let report = Report::new("reduce", &atlas.name, checks);
  if !report.pass {
    let failed: Vec<String> =
      report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    return Err(KgError::Reduction(format!("checks failed: {}", failed.join(", "))));
  }
  Ok((red, report))
}
