//! Piecewise-smooth functions of bounded variation and the weighted
//! variation `V_delta(I, f) = int_I w^delta |df|`.
//!
//! `|df|` is represented exactly as jump atoms at the breakpoints plus the
//! density `|f'| dt` on the smooth pieces.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{integrate, subdivide, AdaptiveConfig};
use crate::weights::WeightSpec;

pub const GRAMMAR: &str = "f descriptors: sgn | step:<x0> | ind:<a>:<b> | poly:<c0,c1,...>";

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Behaviour of one piece between consecutive breakpoints.
#[derive(Clone)]
pub enum Piece {
    Constant(f64),
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
    Smooth { f: RealFn, df: RealFn },
}

impl Piece {
    pub fn smooth<F, D>(f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Piece::Smooth {
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Piece::Constant(c) => *c,
            Piece::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Piece::Smooth { f, .. } => f(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Piece::Constant(_) => 0.0,
            Piece::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck),
            Piece::Smooth { df, .. } => df(x),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Piece::Constant(_) => true,
            Piece::Polynomial(c) => c.iter().skip(1).all(|&ck| ck == 0.0),
            Piece::Smooth { .. } => false,
        }
    }
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Constant(c) => write!(f, "Constant({c})"),
            Piece::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            Piece::Smooth { .. } => f.write_str("Smooth"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Right-continuous piecewise-smooth function on the real line.
#[derive(Debug, Clone)]
pub struct BVFunction {
    descriptor: String,
    breakpoints: Vec<f64>,
    /// `pieces[i]` lives on `[breakpoints[i-1], breakpoints[i])`.
    pieces: Vec<Piece>,
    support_hint: f64,
    parity: Option<Parity>,
}

impl BVFunction {
    /// General constructor; `pieces.len()` must be `breakpoints.len() + 1`.
    pub fn piecewise(
        descriptor: impl Into<String>,
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
    ) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidBv(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidBv("breakpoints must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBv(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let outer_constant =
            pieces[0].is_constant() && pieces.last().is_some_and(Piece::is_constant);
        let support_hint = if outer_constant {
            breakpoints.iter().fold(0.0f64, |m, b| m.max(b.abs()))
        } else {
            f64::INFINITY
        };
        Ok(Self {
            descriptor: descriptor.into(),
            breakpoints,
            pieces,
            support_hint,
            parity: None,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            descriptor: format!("const:{c}"),
            breakpoints: Vec::new(),
            pieces: vec![Piece::Constant(c)],
            support_hint: 0.0,
            parity: Some(Parity::Even),
        }
    }

    /// `lo` below `x0`, `hi` from `x0` on.
    pub fn step(x0: f64, lo: f64, hi: f64) -> Result<Self> {
        let mut f = Self::piecewise(
            format!("step:{x0}"),
            vec![x0],
            vec![Piece::Constant(lo), Piece::Constant(hi)],
        )?;
        if x0 == 0.0 && lo == -hi {
            f.parity = Some(Parity::Odd);
        }
        Ok(f)
    }

    pub fn sgn() -> Self {
        let mut f = Self::step(0.0, -1.0, 1.0).expect("valid step");
        f.descriptor = "sgn".into();
        f
    }

    /// Indicator of `[a, b)`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        let mut f = Self::piecewise(
            format!("ind:{a}:{b}"),
            vec![a, b],
            vec![
                Piece::Constant(0.0),
                Piece::Constant(1.0),
                Piece::Constant(0.0),
            ],
        )?;
        if a == -b {
            f.parity = Some(Parity::Even);
        }
        Ok(f)
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBv(
                "polynomial needs finite coefficients".into(),
            ));
        }
        let descriptor = format!(
            "poly:{}",
            coeffs
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let odd_zero = coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0);
        let even_zero = coeffs.iter().step_by(2).all(|&c| c == 0.0);
        let parity = if odd_zero {
            Some(Parity::Even)
        } else if even_zero {
            Some(Parity::Odd)
        } else {
            None
        };
        let constant = coeffs.iter().skip(1).all(|&c| c == 0.0);
        Ok(Self {
            descriptor,
            breakpoints: Vec::new(),
            pieces: vec![Piece::Polynomial(coeffs)],
            support_hint: if constant { 0.0 } else { f64::INFINITY },
            parity,
        })
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Radius beyond which `f` is constant (infinite if it never is).
    pub fn support_hint(&self) -> f64 {
        self.support_hint
    }

    /// Known symmetry, if any; used to zero coefficients exactly.
    pub fn parity(&self) -> Option<Parity> {
        self.parity
    }

    fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].value(x)
    }

    /// Derivative of the piece containing `x` (right derivative at breakpoints).
    pub fn derivative(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].derivative(x)
    }

    /// `(b, f(b+) - f(b-))` for every breakpoint.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(i, &b)| (b, self.pieces[i + 1].value(b) - self.pieces[i].value(b)))
            .collect()
    }

    /// True unless `x` is a breakpoint carrying a nonzero jump.
    pub fn is_continuous_at(&self, x: f64) -> bool {
        self.jumps().iter().all(|&(b, j)| b != x || j == 0.0)
    }

    /// Total variation on `[lo, hi]`.
    pub fn total_variation(&self, lo: f64, hi: f64) -> Result<Variation> {
        self.weighted_variation(|_| 1.0, |_| 0.0, lo, hi)
    }

    fn weighted_variation<W, D>(&self, weight: W, decay: D, lo: f64, hi: f64) -> Result<Variation>
    where
        W: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("interval [{lo}, {hi}] is not ordered")));
        }
        let mut value = 0.0;
        for (b, j) in self.jumps() {
            if b >= lo && b <= hi {
                value += weight(b) * j.abs();
            }
        }
        let mut remainder = 0.0;
        let cfg = AdaptiveConfig {
            abs_tol: 1e-14,
            max_segments: 20_000,
        };
        let n_pieces = self.pieces.len();
        for (i, piece) in self.pieces.iter().enumerate() {
            if piece.is_constant() {
                continue;
            }
            let left = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
            let right = if i + 1 == n_pieces { f64::INFINITY } else { self.breakpoints[i] };
            let mut a = left.max(lo);
            let mut b = right.min(hi);
            if a >= b {
                continue;
            }
            let density = |t: f64| weight(t) * piece.derivative(t).abs();
            if b.is_infinite() {
                let (cut, rest) = tail_cut(&density, &decay, a.max(0.0).max(1.0), 1.0);
                b = cut;
                remainder += rest;
            }
            if a.is_infinite() {
                let (cut, rest) = tail_cut(&density, &decay, (-b).max(0.0).max(1.0), -1.0);
                a = -cut;
                remainder += rest;
            }
            if a >= b {
                continue;
            }
            let est = integrate(density, &subdivide(a, b, 0.25), cfg);
            if !est.value.is_finite() {
                return Err(Error::InvalidBv(format!(
                    "non-finite variation density on [{a}, {b}]"
                )));
            }
            value += est.value;
            remainder += est.error;
        }
        Ok(Variation { value, remainder })
    }
}

/// Walk outwards until `density * (1 + |x|) < 1e-14`; returns the cut point
/// (as a positive radius) and an estimate of the discarded mass.
fn tail_cut<G: Fn(f64) -> f64, D: Fn(f64) -> f64>(
    density: &G,
    decay: &D,
    start: f64,
    sign: f64,
) -> (f64, f64) {
    let mut r = start;
    for _ in 0..200 {
        let x = sign * r;
        let g = density(x);
        if g * (1.0 + r) < 1e-14 {
            let rate = decay(r);
            let rest = if rate > 0.0 { g / rate } else { g * r };
            return (r, rest);
        }
        r *= 1.5;
    }
    (r, f64::INFINITY)
}

impl FromStr for BVFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown f descriptor '{s}'; {GRAMMAR}"));
        let num = |t: &str| t.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["sgn"] => Ok(Self::sgn()),
            ["step", x0] => Self::step(num(x0).ok_or_else(bad)?, 0.0, 1.0),
            ["ind", a, b] => {
                let (a, b) = (num(a).ok_or_else(bad)?, num(b).ok_or_else(bad)?);
                if a >= b {
                    return Err(Error::InvalidBv(format!(
                        "indicator needs a < b, got {a} >= {b}"
                    )));
                }
                Self::indicator(a, b)
            }
            ["poly", list] => {
                let coeffs = list
                    .split(',')
                    .map(|c| num(c).ok_or_else(bad))
                    .collect::<Result<Vec<_>>>()?;
                Self::polynomial(coeffs)
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variation {
    pub value: f64,
    /// Bound on mass discarded by tail truncation plus quadrature error.
    pub remainder: f64,
}

/// Closed interval, possibly unbounded on either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `[x - r, x + r]`.
    pub fn around(x: f64, r: f64) -> Self {
        Self { lo: x - r, hi: x + r }
    }
}

/// `V_delta(I, f) = int_I w^delta |df|`, `0 < delta <= 1`.
pub fn v_delta(spec: &WeightSpec, f: &BVFunction, interval: Interval, delta: f64) -> Result<Variation> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1]")));
    }
    weighted_by_power(spec, f, interval, delta)
}

/// `int_I w^p |df|` for any `p >= 0`.
pub(crate) fn weighted_by_power(
    spec: &WeightSpec,
    f: &BVFunction,
    interval: Interval,
    p: f64,
) -> Result<Variation> {
    f.weighted_variation(
        |t| (-p * spec.q(t)).exp(),
        |r| p * spec.eval(r).qp,
        interval.lo,
        interval.hi,
    )
}

/// Smallest `c >= 0` with
/// `w^delta(x+t) |f(x+t) - f(x)| <= exp(c x Q'(x)) V_delta([x, x+t], f)`
/// over the supplied offsets with `x t < 0` and `|t| < 2|x|`.
pub fn fitted_envelope_constant(
    spec: &WeightSpec,
    f: &BVFunction,
    x: f64,
    offsets: &[f64],
    delta: f64,
) -> Result<f64> {
    let scale = x * spec.eval(x).qp;
    let fx = f.eval(x);
    let mut c = 0.0f64;
    for &t in offsets {
        if x * t >= 0.0 || t.abs() >= 2.0 * x.abs() {
            continue;
        }
        let y = x + t;
        let lhs = (-delta * spec.q(y)).exp() * (f.eval(y) - fx).abs();
        if lhs == 0.0 {
            continue;
        }
        let v = v_delta(spec, f, Interval::new(y.min(x), y.max(x)), delta)?.value;
        if v <= 0.0 || scale <= 0.0 {
            return Ok(f64::INFINITY);
        }
        c = c.max((lhs / v).ln() / scale);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn freud2() -> WeightSpec {
        WeightSpec::freud(2.0).unwrap()
    }

    #[test]
    fn sgn_shape() {
        let f = BVFunction::sgn();
        assert_eq!(f.breakpoints(), &[0.0]);
        assert_eq!(f.jumps(), vec![(0.0, 2.0)]);
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.eval(-1e-300), -1.0);
        assert_eq!(f.parity(), Some(Parity::Odd));
        assert!(!f.is_continuous_at(0.0));
        assert!(f.is_continuous_at(0.5));
    }

    #[test]
    fn indicator_variation() {
        let f = BVFunction::indicator(1.0, 2.0).unwrap();
        assert_eq!(f.jumps(), vec![(1.0, 1.0), (2.0, -1.0)]);
        assert_eq!(f.total_variation(-10.0, 10.0).unwrap().value, 2.0);
        assert_eq!(f.support_hint(), 2.0);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(2.0), 0.0);
    }

    #[test]
    fn unordered_breakpoints_rejected() {
        let pieces = vec![Piece::Constant(0.0), Piece::Constant(1.0), Piece::Constant(0.0)];
        assert!(BVFunction::piecewise("x", vec![2.0, 1.0], pieces.clone()).is_err());
        assert!(BVFunction::piecewise("x", vec![1.0, 1.0], pieces).is_err());
        assert!("ind:2:1".parse::<BVFunction>().is_err());
    }

    #[test]
    fn descriptors() {
        assert_eq!("sgn".parse::<BVFunction>().unwrap().descriptor(), "sgn");
        let s: BVFunction = "step:1.5".parse().unwrap();
        assert_eq!((s.eval(1.0), s.eval(1.5)), (0.0, 1.0));
        let p: BVFunction = "poly:1,0,-2".parse().unwrap();
        assert_eq!(p.eval(2.0), -7.0);
        assert_eq!(p.derivative(2.0), -8.0);
        assert_eq!(p.parity(), Some(Parity::Even));
        for bad in ["", "sin", "step", "step:x", "poly:", "ind:1", "step:inf"] {
            let err = bad.parse::<BVFunction>().unwrap_err();
            assert!(err.to_string().contains("sgn | step"), "{bad}: {err}");
        }
    }

    #[test]
    fn v_delta_sgn_is_two() {
        for d in ["freud:2", "freud:4", "erdos:1:2"] {
            let spec: WeightSpec = d.parse().unwrap();
            for delta in [0.1, 0.5, 1.0] {
                let v = v_delta(&spec, &BVFunction::sgn(), Interval::REAL, delta).unwrap();
                assert_eq!(v.value, 2.0);
                assert_eq!(v.remainder, 0.0);
            }
        }
    }

    #[test]
    fn v_delta_constant_and_step() {
        let spec = freud2();
        let c = BVFunction::constant(3.0);
        assert_eq!(v_delta(&spec, &c, Interval::REAL, 0.5).unwrap().value, 0.0);
        let s = BVFunction::step(1.0, 0.0, 1.0).unwrap();
        let v = v_delta(&spec, &s, Interval::REAL, 0.5).unwrap().value;
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(v, 0.606_530_659_712_633_4, max_relative = 1e-14);
    }

    #[test]
    fn v_delta_rejects_bad_delta() {
        let spec = freud2();
        for d in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(v_delta(&spec, &BVFunction::sgn(), Interval::REAL, d).is_err());
        }
    }

    #[test]
    fn v_delta_of_polynomial_on_real_line() {
        // int e^{-x^2/2} |2x| dx = 4
        let spec = freud2();
        let f = BVFunction::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
        let v = v_delta(&spec, &f, Interval::REAL, 0.5).unwrap();
        assert!((v.value - 4.0).abs() < 1e-12, "{}", v.value);
        assert!(v.remainder < 1e-12);
    }

    #[test]
    fn additivity() {
        let spec: WeightSpec = "erdos:1:2".parse().unwrap();
        let f = BVFunction::piecewise(
            "atan+jump",
            vec![0.25],
            vec![
                Piece::smooth(f64::atan, |t| 1.0 / (1.0 + t * t)),
                Piece::smooth(|t| t.atan() + 1.0, |t| 1.0 / (1.0 + t * t)),
            ],
        )
        .unwrap();
        let whole = v_delta(&spec, &f, Interval::new(-1.0, 2.0), 0.5).unwrap().value;
        let left = v_delta(&spec, &f, Interval::new(-1.0, 0.7), 0.5).unwrap().value;
        let right = v_delta(&spec, &f, Interval::new(0.7, 2.0), 0.5).unwrap().value;
        assert!((whole - left - right).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_delta() {
        let spec = freud2();
        let f = BVFunction::polynomial(vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        let mut prev = f64::INFINITY;
        for delta in [0.1, 0.3, 0.5, 0.8, 1.0] {
            let v = v_delta(&spec, &f, Interval::REAL, delta).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn envelope_constant_of_sgn_is_zero() {
        let spec = freud2();
        let offsets: Vec<f64> = (1..40).map(|i| -0.05 * i as f64).collect();
        let c = fitted_envelope_constant(&spec, &BVFunction::sgn(), 1.0, &offsets, 0.5).unwrap();
        assert_eq!(c, 0.0);
    }
}
