//! End-to-end pipeline: reduction, collars, gluing, and exact zero counts for
//! the built-in atlases.

use num_rational::Rational64;

use kglue::collar::{build_collars, CollarOpts};
use kglue::examples::{football, redundant, tangent_sphere};
use kglue::gluing::{build_category, GluingOpts};
use kglue::reduction::{build_reduction, ReductionOpts};
use kglue::vfc::{count, CountOpts};
use kglue::{Atlas, Mutation};

fn run_count(atlas: &Atlas, opts: &CountOpts) -> Rational64 {
  let (red, rep) = build_reduction(atlas, &ReductionOpts::default()).unwrap();
  assert!(rep.pass, "{}", rep.to_text());
  let (_, crep) = build_collars(atlas, &red, &CollarOpts::default()).unwrap();
  assert!(crep.pass, "{}", crep.to_text());
  let cat = build_category(atlas, &red, &GluingOpts::default()).unwrap();
  let (total, rep) = count(atlas, &red, &cat, opts).unwrap();
  assert!(rep.pass, "{}", rep.to_text());
  total
}

#[test]
fn tangent_sphere_counts_two() {
  let atlas = tangent_sphere(Mutation::None).unwrap();
  assert_eq!(run_count(&atlas, &CountOpts::default()), Rational64::new(2, 1));
}

#[test]
fn football_2_3_counts_five_sixths() {
  let atlas = football(2, 3, Mutation::None).unwrap();
  assert_eq!(run_count(&atlas, &CountOpts::default()), Rational64::new(5, 6));
}

#[test]
fn football_3_5_counts_eight_fifteenths() {
  let atlas = football(3, 5, Mutation::None).unwrap();
  assert_eq!(run_count(&atlas, &CountOpts::default()), Rational64::new(8, 15));
}

#[test]
fn redundant_atlas_counts_two() {
  let atlas = redundant(Mutation::None).unwrap();
  assert_eq!(run_count(&atlas, &CountOpts::default()), Rational64::new(2, 1));
}

#[test]
fn count_is_seed_and_magnitude_independent() {
  let atlas = tangent_sphere(Mutation::None).unwrap();
  let mut opts = CountOpts::default();
  opts.seed = 99;
  assert_eq!(run_count(&atlas, &opts), Rational64::new(2, 1));
  let mut opts = CountOpts::default();
  opts.mag *= 0.5;
  assert_eq!(run_count(&atlas, &opts), Rational64::new(2, 1));
}

#[test]
fn oversized_radii_are_rejected() {
  let atlas = tangent_sphere(Mutation::OversizedEpsilon).unwrap();
  let err = match build_reduction(&atlas, &ReductionOpts::default()) {
    Err(e) => e,
    Ok(_) => panic!("oversized radii were accepted"),
  };
  assert_eq!(err.exit_code(), 11);
}

#[test]
fn broken_transition_inverse_is_rejected() {
  let atlas = tangent_sphere(Mutation::BrokenTauInverse).unwrap();
  let (red, _) = build_reduction(&atlas, &ReductionOpts::default()).unwrap();
  let cat = build_category(&atlas, &red, &GluingOpts::default()).unwrap();
  let err = cat.check_category(&GluingOpts::default()).unwrap_err();
  assert_eq!(err.exit_code(), 12);
}
