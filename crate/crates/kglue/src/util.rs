//! Shared numerics: small dense-vector helpers, low-discrepancy sampling,
//! smooth cutoff profiles, and a damped Newton solver with finite-difference
//! Jacobians.

use nalgebra as na;

pub type V = na::DVector<f64>;
pub type M = na::DMatrix<f64>;

pub fn vec2(x: f64, y: f64) -> V {
  V::from_vec(vec![x, y])
}

pub fn vec_from(s: &[f64]) -> V {
  V::from_column_slice(s)
}

/// 2x2 rotation matrix applied to the pair (v[0], v[1]).
pub fn rot2_apply(theta: f64, x: f64, y: f64) -> (f64, f64) {
  let (s, c) = theta.sin_cos();
  (c * x - s * y, s * x + c * y)
}

/// Quintic smoothstep on [0,1]; clamps outside.
pub fn smoothstep(t: f64) -> f64 {
  if t <= 0.0 {
    0.0
  } else if t >= 1.0 {
    1.0
  } else {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
  }
}

/// 0 for u <= a, 1 for u >= b, smooth in between.
pub fn ramp_up(u: f64, a: f64, b: f64) -> f64 {
  smoothstep((u - a) / (b - a))
}

/// 1 for u <= a, 0 for u >= b.
pub fn ramp_down(u: f64, a: f64, b: f64) -> f64 {
  1.0 - ramp_up(u, a, b)
}

const HALTON_PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse in the given base.
pub fn halton(mut i: usize, base: usize) -> f64 {
  let mut f = 1.0;
  let mut r = 0.0;
  // index 0 maps to 0; offset so sequences start inside the interval
  i += 1;
  while i > 0 {
    f /= base as f64;
    r += f * (i % base) as f64;
    i /= base;
  }
  r
}

/// i-th point of a Halton sequence scaled into the box; `seed` rotates the
/// sequence deterministically (Cranley-Patterson shift).
pub fn halton_in_box(i: usize, bbox: &[(f64, f64)], seed: u64) -> V {
  let mut out = V::zeros(bbox.len());
  for (d, (lo, hi)) in bbox.iter().enumerate() {
    let shift = ((seed.wrapping_mul(0x9e3779b97f4a7c15).rotate_left(d as u32 * 7)) % 100_000) as f64
      / 100_000.0;
    let t = (halton(i, HALTON_PRIMES[d % HALTON_PRIMES.len()]) + shift).fract();
    out[d] = lo + t * (hi - lo);
  }
  out
}

/// Unit-cube Halton point (for samplers that embed their own geometry).
pub fn halton_cube(i: usize, dim: usize, seed: u64) -> Vec<f64> {
  let unit: Vec<(f64, f64)> = vec![(0.0, 1.0); dim];
  halton_in_box(i, &unit, seed).iter().cloned().collect()
}

/// Central-difference Jacobian of f at x.
pub fn fd_jacobian<F: Fn(&V) -> V>(f: F, x: &V, h: f64) -> M {
  let fx = f(x);
  let m = fx.len();
  let n = x.len();
  let mut jac = M::zeros(m, n);
  for j in 0..n {
    let mut xp = x.clone();
    let mut xm = x.clone();
    xp[j] += h;
    xm[j] -= h;
    let fp = f(&xp);
    let fm = f(&xm);
    for i in 0..m {
      jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
    }
  }
  jac
}

pub struct NewtonResult {
  pub x: V,
  pub residual: f64,
  pub iterations: usize,
}

/// Damped Newton for square systems with finite-difference Jacobian.
/// Returns None if the iteration fails to reach `tol`.
pub fn newton<F: Fn(&V) -> V>(f: F, x0: &V, tol: f64, max_iter: usize) -> Option<NewtonResult> {
  let mut x = x0.clone();
  let mut fx = f(&x);
  if fx.len() != x.len() {
    return None;
  }
  let mut res = fx.norm();
  for it in 0..max_iter {
    if res < tol {
      return Some(NewtonResult { x, residual: res, iterations: it });
    }
    let jac = fd_jacobian(&f, &x, 1e-7);
    let lu = jac.clone().lu();
    // fall back to a truncated least-squares step when the Jacobian is
    // singular (e.g. directions that only activate later along the path)
    let step = match lu.solve(&fx) {
      Some(s) if s.iter().all(|v| v.is_finite()) => s,
      _ => match jac.svd(true, true).solve(&fx, 1e-10) {
        Ok(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => return None,
      },
    };
    let mut lambda = 1.0;
    let mut improved = false;
    for _ in 0..25 {
      let cand = &x - lambda * &step;
      let fc = f(&cand);
      let rc = fc.norm();
      if rc.is_finite() && rc < res {
        x = cand;
        fx = fc;
        res = rc;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if !improved {
      return if res < tol {
        Some(NewtonResult { x, residual: res, iterations: it })
      } else {
        None
      };
    }
  }
  if res < tol {
    Some(NewtonResult { x, residual: res, iterations: max_iter })
  } else {
    None
  }
}

/// Sign of a determinant of a finite-difference Jacobian; returns None when the
/// matrix is numerically singular (condition estimate above `cond_max`).
pub fn jacobian_sign<F: Fn(&V) -> V>(f: F, x: &V, h: f64, cond_max: f64) -> Option<i64> {
  let jac = fd_jacobian(&f, x, h);
  let svd = jac.clone().svd(false, false);
  let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
  let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
  if smin <= 0.0 || smax / smin > cond_max {
    return None;
  }
  let det = jac.determinant();
  Some(if det > 0.0 { 1 } else { -1 })
}

/// Modular inverse of a modulo m for coprime arguments (m >= 1).
pub fn mod_inv(a: usize, m: usize) -> Option<usize> {
  if m == 1 {
    return Some(0);
  }
  let (mut t, mut newt): (i64, i64) = (0, 1);
  let (mut r, mut newr): (i64, i64) = (m as i64, (a % m) as i64);
  while newr != 0 {
    let q = r / newr;
    (t, newt) = (newt, t - q * newt);
    (r, newr) = (newr, r - q * newr);
  }
  if r > 1 {
    return None;
  }
  Some(((t % m as i64 + m as i64) % m as i64) as usize)
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn smoothstep_range_and_plateaus() {
    assert_eq!(smoothstep(-1.0), 0.0);
    assert_eq!(smoothstep(2.0), 1.0);
    assert!((smoothstep(0.5) - 0.5).abs() < 1e-12);
  }

  #[test]
  fn halton_in_unit_interval() {
    for i in 0..100 {
      let h = halton(i, 2);
      assert!(h >= 0.0 && h < 1.0);
    }
  }

  #[test]
  fn newton_solves_quadratic() {
    let f = |x: &V| vec2(x[0] * x[0] - 2.0, x[1] - 1.0);
    let r = newton(f, &vec2(1.0, 0.0), 1e-12, 50).unwrap();
    assert!((r.x[0] - 2.0_f64.sqrt()).abs() < 1e-10);
  }

  #[test]
  fn mod_inv_basics() {
    assert_eq!(mod_inv(3, 5), Some(2));
    assert_eq!(mod_inv(2, 4), None);
    assert_eq!(mod_inv(7, 1), Some(0));
  }
}
