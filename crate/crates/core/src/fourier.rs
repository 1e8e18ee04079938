//! Expansion coefficients, partial sums, the Christoffel–Darboux kernel and
//! the tail integral `Lambda_n(t) = int_t^inf p_n w^2`.

use serde::{Deserialize, Serialize};

use crate::bvfun::{BVFunction, Parity};
use crate::error::{Error, Result};
use crate::mrs::mrs_a;
use crate::orthopoly::{fill_weighted, truncation_radius, RecurrenceTable};
use crate::quad::{integrate, integrate_vec, subdivide, AdaptiveConfig};
use crate::weights::WeightSpec;

/// `|x - t| <= KERNEL_SWITCH * a_n` uses the direct sum.
pub const KERNEL_SWITCH: f64 = 1e-3;

fn check(table: &RecurrenceTable, n: usize) -> Result<()> {
    if n > table.n {
        return Err(Error::DegreeOutOfRange {
            requested: n,
            max: table.n,
        });
    }
    Ok(())
}

fn values(table: &RecurrenceTable, n: usize, x: f64, q_x: f64) -> Vec<f64> {
    let mut q = vec![0.0; n + 1];
    fill_weighted(table, n, x, q_x, &mut q);
    q
}

fn kernel_with(table: &RecurrenceTable, n: usize, x: f64, qx: f64, t: f64, qt: f64, cd: bool) -> f64 {
    let px = values(table, n, x, qx);
    let pt = values(table, n, t, qt);
    if cd {
        table.b[n] * (px[n] * pt[n - 1] - px[n - 1] * pt[n]) / (x - t)
    } else {
        px[..n].iter().zip(&pt[..n]).map(|(a, b)| a * b).sum()
    }
}

fn kernel_branch(table: &RecurrenceTable, spec: &WeightSpec, n: usize, x: f64, t: f64) -> Result<bool> {
    if n == 0 {
        return Err(Error::Domain("kernel needs n >= 1".into()));
    }
    check(table, n)?;
    Ok((x - t).abs() > KERNEL_SWITCH * mrs_a(spec, n as f64)?)
}

/// `K_n(x, t) = sum_{k<n} p_k(x) p_k(t)`.
///
/// Evaluated on the unweighted polynomials, so it overflows to infinity where
/// `p_n` itself does; use [`kernel_weighted`] far out.
pub fn kernel(table: &RecurrenceTable, spec: &WeightSpec, n: usize, x: f64, t: f64) -> Result<f64> {
    let cd = kernel_branch(table, spec, n, x, t)?;
    Ok(kernel_with(table, n, x, 0.0, t, 0.0, cd))
}

/// `K_n(x, t) w(x) w(t)`.
pub fn kernel_weighted(
    table: &RecurrenceTable,
    spec: &WeightSpec,
    n: usize,
    x: f64,
    t: f64,
) -> Result<f64> {
    let cd = kernel_branch(table, spec, n, x, t)?;
    Ok(kernel_with(table, n, x, spec.q(x), t, spec.q(t), cd))
}

/// Christoffel–Darboux branch regardless of `|x - t|`.
pub fn kernel_cd(table: &RecurrenceTable, n: usize, x: f64, t: f64) -> Result<f64> {
    if n == 0 || x == t {
        return Err(Error::Domain("Christoffel-Darboux form needs n >= 1 and x != t".into()));
    }
    check(table, n)?;
    Ok(kernel_with(table, n, x, 0.0, t, 0.0, true))
}

/// Direct-sum branch regardless of `|x - t|`.
pub fn kernel_direct(table: &RecurrenceTable, n: usize, x: f64, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("kernel needs n >= 1".into()));
    }
    check(table, n)?;
    Ok(kernel_with(table, n, x, 0.0, t, 0.0, false))
}

/// Coefficients `c[k] = int f p_k w^2`, `k < N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoeffs {
    pub weight: String,
    pub f: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub c: Vec<f64>,
}

impl ExpansionCoeffs {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.c.len() != c.n {
            return Err(Error::Parse(format!(
                "expected {} coefficients, found {}",
                c.n,
                c.c.len()
            )));
        }
        Ok(c)
    }
}

/// Adaptive panel quadrature of `f (p_k w) w` for all `k < N` at once, split
/// at every breakpoint of `f` and truncated at `max(a_{4N}, Q^{-1}(40))`.
pub fn coefficients(
    table: &RecurrenceTable,
    spec: &WeightSpec,
    f: &BVFunction,
    n: usize,
) -> Result<ExpansionCoeffs> {
    if n == 0 {
        return Err(Error::Domain("need at least one coefficient".into()));
    }
    check(table, n - 1)?;
    let radius = truncation_radius(spec, n, 4.0, 40.0)?;
    let a_n = mrs_a(spec, n as f64)?;
    let width = a_n * std::f64::consts::PI / (n as f64 + 8.0);
    let mut breaks = subdivide(-radius, radius, width);
    breaks.extend(f.breakpoints().iter().copied().filter(|b| b.abs() < radius));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut bad = None;
    let mut q = vec![0.0; n];
    let est = integrate_vec(
        |x, out| {
            let e = spec.eval(x);
            let fx = f.eval(x);
            if !fx.is_finite() {
                bad.get_or_insert(x);
            }
            if e.overflow || e.w == 0.0 {
                out.fill(0.0);
                return;
            }
            fill_weighted(table, n - 1, x, e.q, &mut q);
            let s = fx * e.w;
            for (o, qk) in out.iter_mut().zip(&q) {
                *o = s * qk;
            }
        },
        n,
        &breaks,
        AdaptiveConfig {
            abs_tol: 1e-12,
            max_segments: 200_000,
        },
    );
    if let Some(x) = bad {
        return Err(Error::Domain(format!("f is not finite at {x}")));
    }
    let mut c = est.values;
    match f.parity() {
        Some(Parity::Even) => c.iter_mut().skip(1).step_by(2).for_each(|v| *v = 0.0),
        Some(Parity::Odd) => c.iter_mut().step_by(2).for_each(|v| *v = 0.0),
        None => {}
    }
    Ok(ExpansionCoeffs {
        weight: spec.descriptor().to_string(),
        f: f.descriptor().to_string(),
        n,
        c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSum {
    /// `s_n(f, x)`, or `s_n(f, x) w(x)` when `weighted` is set.
    pub value: f64,
    /// `w(x)` underflowed, so the sum was left multiplied by it.
    pub weighted: bool,
}

/// `s_n(f, x) = sum_{k<n} c[k] p_k(x)`, formed as `(sum c[k] q_k(x)) / w(x)`.
pub fn partial_sum(
    coeffs: &ExpansionCoeffs,
    table: &RecurrenceTable,
    spec: &WeightSpec,
    n: usize,
    x: f64,
) -> Result<PartialSum> {
    if n > coeffs.n {
        return Err(Error::DegreeOutOfRange {
            requested: n,
            max: coeffs.n,
        });
    }
    if n == 0 {
        return Ok(PartialSum {
            value: 0.0,
            weighted: false,
        });
    }
    check(table, n - 1)?;
    let e = spec.eval(x);
    let q = values(table, n - 1, x, e.q);
    let s: f64 = coeffs.c[..n].iter().zip(&q).map(|(c, v)| c * v).sum();
    if e.overflow || e.w == 0.0 {
        return Ok(PartialSum {
            value: s,
            weighted: true,
        });
    }
    Ok(PartialSum {
        value: s / e.w,
        weighted: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIntegral {
    pub value: f64,
    /// Quadrature error plus an estimate of the mass beyond the cut.
    pub remainder: f64,
}

fn tail_setup(table: &RecurrenceTable, spec: &WeightSpec, n: usize) -> Result<(f64, f64, f64)> {
    check(table, n)?;
    let m = n.max(1) as f64;
    let upper = mrs_a(spec, 4.0 * m)? + 10.0;
    let width = mrs_a(spec, m)? * std::f64::consts::PI / (m + 8.0);
    let e = spec.eval(upper);
    let q = values(table, n, upper, e.q)[n];
    let beyond = if e.overflow || e.qp <= 0.0 {
        0.0
    } else {
        (q * e.w).abs() / e.qp
    };
    Ok((upper, width, beyond))
}

fn tail_piece(table: &RecurrenceTable, spec: &WeightSpec, n: usize, lo: f64, hi: f64, width: f64) -> (f64, f64) {
    if hi <= lo {
        return (0.0, 0.0);
    }
    let mut q = vec![0.0; n + 1];
    let est = integrate(
        |v| {
            let e = spec.eval(v);
            if e.overflow || e.w == 0.0 {
                return 0.0;
            }
            fill_weighted(table, n, v, e.q, &mut q);
            q[n] * e.w
        },
        &subdivide(lo, hi, width),
        AdaptiveConfig {
            abs_tol: 1e-14,
            max_segments: 50_000,
        },
    );
    (est.value, est.error)
}

/// `Lambda_n(t) = int_t^inf p_n w^2`, integrated up to `a_{4n} + 10`.
pub fn tail_integral(table: &RecurrenceTable, spec: &WeightSpec, n: usize, t: f64) -> Result<TailIntegral> {
    let (upper, width, beyond) = tail_setup(table, spec, n)?;
    let lo = t.max(-upper);
    let (value, err) = tail_piece(table, spec, n, lo, upper, width);
    let below = if t < -upper { beyond } else { 0.0 };
    Ok(TailIntegral {
        value,
        remainder: err + beyond + below,
    })
}

/// [`tail_integral`] on a whole grid, accumulated from the right so each
/// interval is integrated once. Output order matches `ts`.
pub fn tail_integral_grid(
    table: &RecurrenceTable,
    spec: &WeightSpec,
    n: usize,
    ts: &[f64],
) -> Result<Vec<TailIntegral>> {
    let (upper, width, beyond) = tail_setup(table, spec, n)?;
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&i, &j| ts[j].total_cmp(&ts[i]));
    let mut out = vec![
        TailIntegral {
            value: 0.0,
            remainder: 0.0
        };
        ts.len()
    ];
    let (mut acc, mut err) = (0.0, beyond);
    let mut right = upper;
    for i in order {
        let lo = ts[i].clamp(-upper, upper);
        if lo < right {
            let (v, e) = tail_piece(table, spec, n, lo, right, width);
            acc += v;
            err += e;
            right = lo;
        }
        let below = if ts[i] < -upper { beyond } else { 0.0 };
        out[i] = TailIntegral {
            value: acc,
            remainder: err + below,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvfun::Piece;
    use crate::orthopoly::{
        christoffel, eval_poly, gauss_rule, recurrence_table, DiscretizationConfig,
    };
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(d: &str, n: usize) -> (WeightSpec, RecurrenceTable) {
        let spec: WeightSpec = d.parse().unwrap();
        let t = recurrence_table(&spec, n, &DiscretizationConfig::default()).unwrap();
        (spec, t)
    }

    #[test]
    fn kernel_degree_one() {
        let (spec, t) = setup("freud:2", 8);
        for (x, y) in [(0.0, 0.0), (1.0, -2.0), (0.3, 0.3001)] {
            assert_relative_eq!(kernel(&t, &spec, 1, x, y).unwrap(), (2.0 / PI).sqrt(), max_relative = 1e-13);
        }
    }

    #[test]
    fn branches_agree() {
        let (spec, t) = setup("freud:2", 32);
        let cd = kernel_cd(&t, 16, 0.3, 1.1).unwrap();
        let direct = kernel_direct(&t, 16, 0.3, 1.1).unwrap();
        assert!((cd - direct).abs() <= 1e-10 * direct.abs(), "{cd} {direct}");
        assert_eq!(kernel(&t, &spec, 16, 0.3, 1.1).unwrap(), cd);
        let (spec, t) = setup("erdos:1:2", 32);
        let a = mrs_a(&spec, 32.0).unwrap();
        for h in [2e-3, 1e-2] {
            let (x, y) = (0.2, 0.2 + h * a);
            let cd = kernel_cd(&t, 32, x, y).unwrap();
            let direct = kernel_direct(&t, 32, x, y).unwrap();
            assert!((cd - direct).abs() <= 1e-8 * direct.abs());
        }
    }

    #[test]
    fn kernel_symmetric() {
        let (spec, t) = setup("erdos:1:2", 32);
        for (x, y) in [(0.1, 0.9), (-0.5, 0.2), (0.0, 1.3)] {
            let a = kernel(&t, &spec, 32, x, y).unwrap();
            let b = kernel(&t, &spec, 32, y, x).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn christoffel_reciprocal() {
        let (spec, t) = setup("freud:4", 16);
        for x in [-1.0, 0.0, 0.4, 1.2] {
            let l = christoffel(&t, &spec, 16, x).unwrap().value;
            assert!((l * kernel(&t, &spec, 16, x, x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_integrates_to_one() {
        let (spec, t) = setup("freud:2", 16);
        let r = gauss_rule(&t, 16).unwrap();
        for x in [0.0, 0.7 * 4.0] {
            let s = r.integrate(|y| kernel(&t, &spec, 16, x, y).unwrap());
            assert!((s - 1.0).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn constant_coefficients() {
        let (spec, t) = setup("freud:2", 8);
        let c = coefficients(&t, &spec, &BVFunction::constant(1.0), 8).unwrap();
        assert_relative_eq!(c.c[0], (PI / 2.0).powf(0.25), max_relative = 1e-12);
        assert!(c.c[1..].iter().all(|v| v.abs() < 1e-10));
        let s = partial_sum(&c, &t, &spec, 1, 1.7).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12 && !s.weighted);
    }

    #[test]
    fn orthonormal_basis_element() {
        let (spec, t) = setup("erdos:1:2", 8);
        let table = t.clone();
        let p3 = BVFunction::piecewise(
            "p3",
            vec![],
            vec![Piece::smooth(move |x| eval_poly(&table, 3, x).unwrap(), |_| 0.0)],
        )
        .unwrap();
        let c = coefficients(&t, &spec, &p3, 8).unwrap();
        for (k, v) in c.c.iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-10, "c[{k}] = {v}");
        }
    }

    #[test]
    fn sgn_coefficients() {
        let (spec, t) = setup("freud:2", 16);
        let c = coefficients(&t, &spec, &BVFunction::sgn(), 16).unwrap();
        assert!(c.c.iter().step_by(2).all(|&v| v == 0.0));
        // c_1 = 2 p_1-leading * int_0^inf x e^{-2x^2} = 2 * (2/sqrt(mu0)) * 1/4
        let mu0 = (PI / 2.0).sqrt();
        assert_relative_eq!(c.c[1], 1.0 / mu0.sqrt(), max_relative = 1e-11);
        for n in [1, 5, 16] {
            assert_eq!(partial_sum(&c, &t, &spec, n, 0.0).unwrap().value, 0.0);
        }
        let bessel: f64 = c.c.iter().map(|v| v * v).sum();
        assert!(bessel <= mu0 + 1e-10);
    }

    #[test]
    fn polynomial_reproduction() {
        let (spec, t) = setup("freud:4", 8);
        let f = BVFunction::polynomial(vec![0.5, -1.0, 0.25, 2.0]).unwrap();
        let c = coefficients(&t, &spec, &f, 8).unwrap();
        for x in [-1.3, 0.0, 0.2, 1.1] {
            let s = partial_sum(&c, &t, &spec, 5, x).unwrap().value;
            assert!((s - f.eval(x)).abs() <= 1e-9 * f.eval(x).abs().max(1.0), "{x}: {s}");
        }
    }

    #[test]
    fn partial_sum_flags_underflow() {
        let (spec, t) = setup("freud:2", 8);
        let c = coefficients(&t, &spec, &BVFunction::constant(1.0), 8).unwrap();
        let s = partial_sum(&c, &t, &spec, 3, 40.0).unwrap();
        assert!(s.weighted);
        assert!(partial_sum(&c, &t, &spec, 9, 0.0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let (spec, t) = setup("freud:2", 4);
        let c = coefficients(&t, &spec, &BVFunction::indicator(-1.0, 0.5).unwrap(), 4).unwrap();
        assert_eq!(ExpansionCoeffs::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn tail_integral_values() {
        let (spec, t) = setup("freud:2", 32);
        let l0 = tail_integral(&t, &spec, 0, 0.0).unwrap();
        assert_relative_eq!(l0.value, 0.5 * (PI / 2.0).powf(0.25), max_relative = 1e-12);
        for n in [1, 2, 7, 32] {
            let deep = -(mrs_a(&spec, 4.0 * n as f64).unwrap() + 10.0);
            let v = tail_integral(&t, &spec, n, deep).unwrap().value;
            assert!(v.abs() < 1e-9, "n={n}: {v}");
        }
    }

    #[test]
    fn tail_grid_matches_pointwise() {
        let (spec, t) = setup("erdos:1:2", 16);
        let ts = [0.5, -0.3, 1.2, 0.0, 0.5];
        let grid = tail_integral_grid(&t, &spec, 16, &ts).unwrap();
        for (ti, g) in ts.iter().zip(&grid) {
            let p = tail_integral(&t, &spec, 16, *ti).unwrap();
            assert!((p.value - g.value).abs() < 1e-12);
        }
    }
}
