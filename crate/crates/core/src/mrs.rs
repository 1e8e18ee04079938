//! Mhaskar–Rakhmanov–Saff numbers and the scale factors built on them.
//!
//! `a_t` is the positive root of
//! `F(a) = (2/pi) \int_0^1 a u Q'(a u) / sqrt(1 - u^2) du = t`.
//! After `u = sin(theta)` the integrand is bounded, and `F` is strictly
//! increasing in `a`, so a bracket always exists.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::weights::WeightSpec;

/// Relative residual tolerance of the MRS solve.
pub const MRS_REL_TOL: f64 = 1e-12;
const MRS_ABS_TOL: f64 = 1e-300;
const MAX_DOUBLINGS: usize = 200;
const QUAD_START_ORDER: usize = 64;
const QUAD_MAX_ORDER: usize = 8192;
const QUAD_REL_CHANGE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrsValue {
    pub t: f64,
    pub a: f64,
    /// `T(a_t)`.
    #[serde(rename = "T_at")]
    pub t_at: f64,
}

/// One row of the persisted MRS table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrsRow {
    pub weight: String,
    pub t: f64,
    pub a: f64,
    #[serde(rename = "T_at")]
    pub t_at: f64,
}

/// Insert-once memo of solved MRS numbers for one weight.
#[derive(Debug, Default)]
pub struct MrsCache {
    values: RwLock<HashMap<u64, MrsValue>>,
}

impl MrsCache {
    pub fn get(&self, t: f64) -> Option<MrsValue> {
        self.values
            .read()
            .expect("mrs cache poisoned")
            .get(&t.to_bits())
            .copied()
    }

    pub fn insert(&self, value: MrsValue) {
        self.values
            .write()
            .expect("mrs cache poisoned")
            .entry(value.t.to_bits())
            .or_insert(value);
    }

    pub fn len(&self) -> usize {
        self.values.read().expect("mrs cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries sorted by `t`.
    pub fn rows(&self, weight: &str) -> Vec<MrsRow> {
        let mut rows: Vec<MrsRow> = self
            .values
            .read()
            .expect("mrs cache poisoned")
            .values()
            .map(|v| MrsRow {
                weight: weight.to_string(),
                t: v.t,
                a: v.a,
                t_at: v.t_at,
            })
            .collect();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        rows
    }
}

/// Persist the cached MRS values of `spec` as a JSON array.
pub fn cache_to_json(spec: &WeightSpec) -> Result<String> {
    Ok(serde_json::to_string_pretty(
        &spec.mrs_cache().rows(spec.descriptor()),
    )?)
}

/// Seed the cache of `spec` from a JSON array; rows for other weights are ignored.
pub fn cache_from_json(spec: &WeightSpec, json: &str) -> Result<usize> {
    let rows: Vec<MrsRow> = serde_json::from_str(json)?;
    let mut loaded = 0;
    for row in rows.into_iter().filter(|r| r.weight == spec.descriptor()) {
        spec.mrs_cache().insert(MrsValue {
            t: row.t,
            a: row.a,
            t_at: row.t_at,
        });
        loaded += 1;
    }
    Ok(loaded)
}

fn mrs_integral_order(spec: &WeightSpec, a: f64, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let integral = rule.integrate(0.0, half_pi, |theta| {
        let x = a * theta.sin();
        x * spec.eval(x).qp
    });
    integral * 2.0 / std::f64::consts::PI
}

/// `F(a)`, the right-hand side of the MRS equation.
pub fn mrs_integral(spec: &WeightSpec, a: f64) -> f64 {
    let mut order = QUAD_START_ORDER;
    let mut prev = mrs_integral_order(spec, a, order);
    while order < QUAD_MAX_ORDER {
        order *= 2;
        let next = mrs_integral_order(spec, a, order);
        if !next.is_finite() {
            return next;
        }
        let done = (next - prev).abs() <= QUAD_REL_CHANGE * next.abs();
        prev = next;
        if done {
            break;
        }
    }
    prev
}

/// Solve the MRS equation for `a_t`, memoized per weight.
pub fn mrs_number(spec: &WeightSpec, t: f64) -> Result<MrsValue> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("MRS number needs t > 0, got {t}")));
    }
    if let Some(v) = spec.mrs_cache().get(t) {
        return Ok(v);
    }
    let a = solve_mrs(spec, t)?;
    let value = MrsValue {
        t,
        a,
        t_at: spec.t(a),
    };
    spec.mrs_cache().insert(value);
    Ok(value)
}

/// Shorthand for `mrs_number(spec, t)?.a`.
pub fn mrs_a(spec: &WeightSpec, t: f64) -> Result<f64> {
    Ok(mrs_number(spec, t)?.a)
}

fn solve_mrs(spec: &WeightSpec, t: f64) -> Result<f64> {
    let tol = (MRS_REL_TOL * t).max(MRS_ABS_TOL);
    let residual = |a: f64| mrs_integral(spec, a) - t;

    let (mut lo, mut hi) = (1.0, 1.0);
    let mut f_lo = residual(lo);
    let mut f_hi = f_lo;
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    let mut steps = 0;
    if f_lo < 0.0 {
        while f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = residual(hi);
            steps += 1;
            if steps > MAX_DOUBLINGS {
                return Err(Error::Bracket { t, doublings: steps });
            }
        }
    } else {
        while f_lo > 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = residual(lo);
            steps += 1;
            if steps > MAX_DOUBLINGS {
                return Err(Error::Bracket { t, doublings: steps });
            }
        }
    }

    // Bisection with a secant attempt on alternate steps.
    for iter in 0..400 {
        if f_lo.abs() <= tol {
            return Ok(lo);
        }
        if f_hi.abs() <= tol {
            return Ok(hi);
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * hi {
            return Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi });
        }
        let mut mid = 0.5 * (lo + hi);
        if iter % 2 == 0 && f_hi.is_finite() {
            let s = lo - f_lo * width / (f_hi - f_lo);
            if s > lo + 0.01 * width && s < hi - 0.01 * width {
                mid = s;
            }
        }
        let f_mid = residual(mid);
        if f_mid.abs() <= tol {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleFactors {
    pub u: f64,
    pub delta_u: f64,
    pub phi_at_x: f64,
}

/// `delta_u = (u T(a_u))^(-2/3)`.
pub fn delta_u(spec: &WeightSpec, u: f64) -> Result<f64> {
    let m = mrs_number(spec, u)?;
    Ok((u * m.t_at).powf(-2.0 / 3.0))
}

/// `phi_u(x)`: `(a_u/u) (1 - |x|/a_{2u}) / sqrt(1 - |x|/a_u + delta_u)` on
/// `|x| <= a_u`, constant at its edge value beyond.
pub fn phi_u(spec: &WeightSpec, u: f64, x: f64) -> Result<f64> {
    Ok(scale_factors(spec, u, x)?.phi_at_x)
}

pub fn scale_factors(spec: &WeightSpec, u: f64, x: f64) -> Result<ScaleFactors> {
    let au = mrs_number(spec, u)?;
    let a2u = mrs_a(spec, 2.0 * u)?;
    let delta = (u * au.t_at).powf(-2.0 / 3.0);
    let ax = x.abs().min(au.a);
    let phi = (au.a / u) * (1.0 - ax / a2u) / (1.0 - ax / au.a + delta).sqrt();
    Ok(ScaleFactors {
        u,
        delta_u: delta,
        phi_at_x: phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn freud_closed_forms() {
        let f2 = WeightSpec::freud(2.0).unwrap();
        assert!((mrs_a(&f2, 4.0).unwrap() - 2.0).abs() < 1e-10);
        let f4 = WeightSpec::freud(4.0).unwrap();
        assert!((mrs_a(&f4, 24.0).unwrap() - 2.0).abs() < 1e-10);
        assert!(mrs_a(&f2, 1.0).unwrap() < mrs_a(&f2, 4.0).unwrap());
    }

    #[test]
    fn freud_integral_is_a_squared() {
        let f2 = WeightSpec::freud(2.0).unwrap();
        for a in [0.3, 1.0, 2.5, 17.0] {
            assert_relative_eq!(mrs_integral(&f2, a), a * a, max_relative = 1e-14);
        }
    }

    #[test]
    fn noninteger_alpha_matches_gamma_closed_form() {
        // F(a) = a^alpha * alpha * Gamma((alpha+1)/2) / (sqrt(pi) Gamma(alpha/2 + 1)) ... for alpha = 3:
        // (2/pi) * 3 a^3 * int u^3/sqrt(1-u^2) = (2/pi) * 3 a^3 * 2/3 = 4 a^3 / pi
        let f3 = WeightSpec::freud(3.0).unwrap();
        assert_relative_eq!(mrs_integral(&f3, 1.7), 4.0 * 1.7f64.powi(3) / std::f64::consts::PI, max_relative = 1e-13);
        // alpha = 1.5: int u^1.5 / sqrt(1-u^2) du = B(5/4, 1/2) / 2 = 0.8740191847640...
        let f = WeightSpec::freud(1.5).unwrap();
        let beta_half = 0.874_019_184_764_01;
        let want = 2.0 / std::f64::consts::PI * 1.5 * beta_half;
        assert_relative_eq!(mrs_integral(&f, 1.0), want, max_relative = 1e-10);
    }

    #[test]
    fn rejects_nonpositive_t() {
        let f2 = WeightSpec::freud(2.0).unwrap();
        assert!(mrs_number(&f2, 0.0).is_err());
        assert!(mrs_number(&f2, -3.0).is_err());
        assert!(mrs_number(&f2, f64::NAN).is_err());
    }

    #[test]
    fn small_and_large_t() {
        let f2 = WeightSpec::freud(2.0).unwrap();
        for t in [1e-6, 1e-2, 1e4, 1e8] {
            assert_relative_eq!(mrs_a(&f2, t).unwrap(), t.sqrt(), max_relative = 1e-11);
        }
    }

    #[test]
    fn erdos_residual_and_monotone() {
        let e = WeightSpec::erdos(1, 2.0).unwrap();
        let mut prev = 0.0;
        for t in [0.5, 1.0, 8.0, 64.0, 512.0, 4096.0] {
            let v = mrs_number(&e, t).unwrap();
            assert!((mrs_integral(&e, v.a) - t).abs() <= 1e-12 * t);
            assert!(v.a > prev);
            prev = v.a;
        }
    }

    #[test]
    fn scale_factor_example() {
        let f2 = WeightSpec::freud(2.0).unwrap();
        let s = scale_factors(&f2, 4.0, 0.0).unwrap();
        assert_relative_eq!(s.delta_u, 0.25, max_relative = 1e-12);
        assert_relative_eq!(s.phi_at_x, 0.5 / 1.25f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn phi_even_and_plateau() {
        let e = WeightSpec::erdos(1, 2.0).unwrap();
        let u = 10.0;
        let au = mrs_a(&e, u).unwrap();
        for x in [0.1, 0.5, 1.0, au * 0.99] {
            assert_eq!(phi_u(&e, u, x).unwrap(), phi_u(&e, u, -x).unwrap());
        }
        let edge = phi_u(&e, u, au).unwrap();
        for x in [au, au * 1.01, au * 2.0, -au * 3.0] {
            assert_eq!(phi_u(&e, u, x).unwrap(), edge);
        }
    }

    #[test]
    fn cache_roundtrip() {
        let f4 = WeightSpec::freud(4.0).unwrap();
        for t in [1.0, 24.0, 100.0] {
            mrs_number(&f4, t).unwrap();
        }
        let json = cache_to_json(&f4).unwrap();
        let fresh = WeightSpec::freud(4.0).unwrap();
        assert_eq!(cache_from_json(&fresh, &json).unwrap(), 3);
        assert_eq!(mrs_number(&fresh, 24.0).unwrap(), mrs_number(&f4, 24.0).unwrap());
        let other = WeightSpec::freud(2.0).unwrap();
        assert_eq!(cache_from_json(&other, &json).unwrap(), 0);
    }
}
