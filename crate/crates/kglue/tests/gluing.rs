//! Structural properties of the glued space: transition consistency, the
//! collar power law, fiber degrees, branch weights, and collar-step algebra.

use num_rational::Rational64;

use kglue::atlas::Atlas;
use kglue::collar::collar_step;
use kglue::examples::{football, redundant, tangent_sphere};
use kglue::gluing::{build_category, Category, GluingOpts, MPoint};
use kglue::reduction::{build_reduction, Reduction, ReductionOpts};
use kglue::thickening::{iota_ev, rescale, y_residual};
use kglue::util::{self, V};
use kglue::{IndexSet, Mutation};

fn setup(atlas: &Atlas) -> (Reduction, Category<'_>) {
  let (red, _) = build_reduction(atlas, &ReductionOpts::default()).unwrap();
  // the category borrows the reduction, so leak a copy for test convenience
  let red_ref: &'static Reduction = Box::leak(Box::new(Reduction {
    margins: red.margins.clone(),
    w0: red.w0,
    eps0: red.eps0,
    kappa: red.kappa,
  }));
  let cat = build_category(atlas, red_ref, &GluingOpts::default()).unwrap();
  (red, cat)
}

#[test]
fn categories_check_out() {
  for atlas in [
    tangent_sphere(Mutation::None).unwrap(),
    football(2, 3, Mutation::None).unwrap(),
    redundant(Mutation::None).unwrap(),
  ] {
    let (_, cat) = setup(&atlas);
    let mut opts = GluingOpts::default();
    opts.check_samples = 100;
    let rep = match cat.check_category(&opts) {
      Ok(r) => r,
      Err(e) => panic!("{}: {}", atlas.name, e),
    };
    assert!(rep.pass, "{}: {}", atlas.name, rep.to_text());
  }
}

/// Opening one collar direction scales the section by the square root of the
/// free coordinate: |s_new(embedded point)| = |e|^{3/2}.
#[test]
fn collar_power_law() {
  let atlas = football(2, 3, Mutation::None).unwrap();
  let (red, cat) = setup(&atlas);
  let i1 = IndexSet::singleton(0);
  let i12 = IndexSet::from_slice(&[0, 1]);
  let mut n = 0;
  let mut k = 0;
  while n < 100 && k < 4000 {
    k += 1;
    let cube = util::halton_cube(k, 4, 11);
    // stay where the overlap cutoff saturates so a single full step happens
    let u = 0.44 + 0.16 * cube[0];
    let theta = std::f64::consts::TAU * cube[1];
    let x1 = util::vec2(u * (3.0 * theta).cos(), u * (3.0 * theta).sin());
    let p = atlas.base_at(i1, &x1);
    if red.chi(&atlas, i12, &p) < 1.0 {
      continue;
    }
    let e2 = util::vec2((cube[2] - 0.5) * 1e-4, (cube[3] - 0.5) * 1e-4);
    let mut e = V::zeros(atlas.obs.total());
    atlas.obs.set_comp(&mut e, 1, &e2);
    let m = MPoint { index: i1, e, x: x1 };
    let img = cat.alpha(i1, i12, &m).unwrap();
    let s2 = atlas.obs.comp_norm(&atlas.section_at(i12, &img.x), 1);
    let expected = e2.norm().powf(1.5);
    assert!(
      (s2 - expected).abs() <= 1e-6 * expected.max(1e-12),
      "sample {k}: |s2|={s2:.3e} vs |e|^1.5={expected:.3e}"
    );
    n += 1;
  }
  assert_eq!(n, 100, "not enough saturated samples");
}

/// The number of branch images equals the covering degree |Gamma_J|/|Gamma_I|.
#[test]
fn fiber_degrees_match_group_orders() {
  let atlas = football(2, 3, Mutation::None).unwrap();
  let (_, cat) = setup(&atlas);
  let i12 = IndexSet::from_slice(&[0, 1]);
  for (i, expect) in [(IndexSet::singleton(0), 3usize), (IndexSet::singleton(1), 2usize)] {
    let mut n = 0;
    for (k, xt) in atlas.sample_tilde(i, i12, 400, 31).iter().enumerate() {
      let cc = atlas.change(i, i12).unwrap();
      let x = (cc.rho)(xt);
      let cube = util::halton_cube(k, 2, 32);
      let mut e = V::zeros(atlas.obs.total());
      let comp = util::vec2((cube[0] - 0.5) * 1e-4, (cube[1] - 0.5) * 1e-4);
      atlas.obs.set_comp(&mut e, i12.minus(&i).min_index().unwrap(), &comp);
      let m = MPoint { index: i, e, x };
      let Ok(fiber) = cat.tau_fiber(i, i12, &m) else { continue };
      assert_eq!(fiber.len(), expect, "fiber over chart {} sample {}", i, k);
      n += 1;
    }
    assert!(n >= 200, "only {n} fibers computed for chart {i}");
  }
}

/// Branch weights: a point reached from the small chart weighs 1/|Gamma_I|,
/// which equals (number of branches) / |Gamma_J|.
#[test]
fn weights_sum_over_branches() {
  let atlas = football(2, 3, Mutation::None).unwrap();
  let (red, cat) = setup(&atlas);
  let i12 = IndexSet::from_slice(&[0, 1]);
  for (i, ord_i) in [(IndexSet::singleton(0), 2i64), (IndexSet::singleton(1), 3i64)] {
    let other = i12.minus(&i);
    let mut n = 0;
    for xt in atlas.sample_tilde(i, i12, 1200, 41) {
      let cc = atlas.change(i, i12).unwrap();
      let x = (cc.rho)(&xt);
      // only points squarely in this chart's own region, out of reach of the
      // other basic chart, have the weight of this chart's isotropy group
      let p = atlas.base_at(i, &x);
      if red.score(&atlas, i, &p) < red.margins[0] + 0.05
        || red.score(&atlas, other, &p) > red.margins[0] - 0.05
      {
        continue;
      }
      let m = MPoint { index: i, e: V::zeros(atlas.obs.total()), x };
      let Ok(img) = cat.alpha(i, i12, &m) else { continue };
      let w = cat.weight(&img);
      assert_eq!(w, Rational64::new(1, ord_i), "weight at image of chart {i}");
      let fiber = cat.tau_fiber(i, i12, &m).unwrap();
      assert_eq!(
        Rational64::new(fiber.len() as i64, 6),
        w,
        "branch count does not reproduce the weight"
      );
      n += 1;
      if n >= 50 {
        break;
      }
    }
    assert!(n >= 50, "only {n} weight samples for chart {i}");
  }
}

/// Collar steps toward the current stratum leave the point alone except for
/// the announced collar-coordinate change.
#[test]
fn collar_step_within_stratum_only_moves_t() {
  let atlas = redundant(Mutation::None).unwrap();
  let i13 = IndexSet::from_slice(&[0, 2]);
  let i123 = IndexSet::from_slice(&[0, 1, 2]);
  let mut n = 0;
  for (k, xt) in atlas.sample_tilde(i13, i123, 220, 51).iter().enumerate() {
    let cube = util::halton_cube(k, atlas.obs.total(), 52);
    let e_rest = V::from_iterator(atlas.obs.total(), cube.iter().map(|c| (c - 0.5) * 2e-4));
    let y = iota_ev(&atlas, i123, i13, &e_rest, xt);
    let r = 0.01;
    let stepped = collar_step(&atlas, &y, i13, r).unwrap();
    assert!((stepped.x.clone() - &y.x).norm() < 1e-12, "base point moved");
    let before = atlas.obs.project(&y.e, atlas.full_minus(i13));
    let after = atlas.obs.project(&stepped.e, atlas.full_minus(i13));
    assert!((before - after).norm() < 1e-12, "free coordinates moved");
    for b in 0..3 {
      let expect = (1.0 - r * 2.0) * y.t[b] + if i13.contains(b) { r } else { 0.0 };
      assert!((stepped.t[b] - expect).abs() < 1e-12, "collar coordinate {b}");
    }
    assert!(y_residual(&atlas, &stepped) < 1e-10);
    n += 1;
  }
  assert!(n >= 200);
}

/// Freshly opened collar directions carry exactly the step parameter, and
/// iterating along a chain keeps the earlier values consistent.
#[test]
fn collar_chain_coordinates_are_explicit() {
  let atlas = redundant(Mutation::None).unwrap();
  let i1 = IndexSet::singleton(0);
  let i13 = IndexSet::from_slice(&[0, 2]);
  let i123 = IndexSet::from_slice(&[0, 1, 2]);
  let mut n = 0;
  for (k, xt) in atlas.sample_tilde(i1, i123, 220, 61).iter().enumerate() {
    let cube = util::halton_cube(k, atlas.obs.total(), 62);
    let e_rest = V::from_iterator(atlas.obs.total(), cube.iter().map(|c| (c - 0.5) * 2e-4));
    let y = iota_ev(&atlas, i123, i1, &e_rest, xt);
    let (r1, r2) = (0.012, 0.008);
    let s1 = collar_step(&atlas, &y, i13, r1).unwrap();
    assert!((s1.t[2] - r1).abs() < 1e-12, "new direction gets the parameter");
    let s2 = collar_step(&atlas, &s1, i123, r2).unwrap();
    assert!((s2.t[1] - r2).abs() < 1e-12);
    assert!((s2.t[2] - ((1.0 - 3.0 * r2) * r1 + r2)).abs() < 1e-12);
    assert!(y_residual(&atlas, &s2) < 1e-10);
    // the free coordinate outside the final stratum is never touched
    n += 1;
  }
  assert!(n >= 200);
}

/// Rescaling the collar coordinates on a sub-stratum (keeping their sum) does
/// not change the underlying stepped point or the free coordinates.
#[test]
fn rescaling_substratum_is_invisible_downstream() {
  let atlas = redundant(Mutation::None).unwrap();
  let i13 = IndexSet::from_slice(&[0, 2]);
  let i123 = IndexSet::from_slice(&[0, 1, 2]);
  let mut n = 0;
  for (k, xt) in atlas.sample_tilde(i13, i123, 220, 71).iter().enumerate() {
    let cube = util::halton_cube(k, atlas.obs.total() + 1, 72);
    let e_rest =
      V::from_iterator(atlas.obs.total(), cube.iter().take(atlas.obs.total()).map(|c| (c - 0.5) * 2e-4));
    let y = iota_ev(&atlas, i123, i13, &e_rest, xt);
    // perturb the split of t over the stratum while preserving the sum
    let m1 = 0.8 + 0.4 * cube[atlas.obs.total()];
    let m3 = (y.t[0] + y.t[2] - y.t[0] * m1) / y.t[2];
    let ry = rescale(&atlas, &y, i13, &[m1, m3]);
    assert!(y_residual(&atlas, &ry) < 1e-10, "rescaling broke the relations");
    let a = collar_step(&atlas, &y, i123, 0.01).unwrap();
    let b = collar_step(&atlas, &ry, i123, 0.01).unwrap();
    assert!((a.x.clone() - &b.x).norm() < 1e-12, "stepped point depends on the split");
    let pa = atlas.obs.get_comp(&a.e, 1);
    let pb = atlas.obs.get_comp(&b.e, 1);
    assert!((pa - pb).norm() < 1e-12, "free coordinate depends on the split");
    n += 1;
  }
  assert!(n >= 200);
}
