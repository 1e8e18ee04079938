//! Exponential weight families `w = exp(-Q)` on the real line.
//!
//! Two analytic families are built in: Freud weights `Q = |x|^alpha` and the
//! Erdős tower `Q = exp_l(|x|^alpha) - exp_l(0)`. Custom weights supply `Q`,
//! `Q'` and `Q''` as closures.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mrs::MrsCache;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User supplied `Q`, `Q'`, `Q''`.
#[derive(Clone)]
pub struct CustomWeight {
    pub name: String,
    pub q: RealFn,
    pub qp: RealFn,
    pub qpp: RealFn,
    /// Limit of `T` at the origin, if known.
    pub t_at_zero: Option<f64>,
}

#[derive(Clone)]
pub enum WeightFamily {
    Freud { alpha: f64 },
    Erdos { ell: u32, alpha: f64 },
    Custom(CustomWeight),
}

impl fmt::Debug for WeightFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Freud { alpha } => write!(f, "Freud {{ alpha: {alpha} }}"),
            Self::Erdos { ell, alpha } => write!(f, "Erdos {{ ell: {ell}, alpha: {alpha} }}"),
            Self::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

/// An instance of a weight family together with its class constants.
///
/// Immutable after construction. The MRS cache is shared between clones.
#[derive(Clone)]
pub struct WeightSpec {
    family: WeightFamily,
    lambda_lower: f64,
    freud_type: bool,
    descriptor: String,
    mrs_cache: Arc<MrsCache>,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("family", &self.family)
            .field("lambda_lower", &self.lambda_lower)
            .field("freud_type", &self.freud_type)
            .finish()
    }
}

/// Pointwise evaluation of a weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightEval {
    pub q: f64,
    pub qp: f64,
    pub qpp: f64,
    pub t: f64,
    pub w: f64,
    /// `Q` exceeded the representable range; `w` is exactly 0 and the other
    /// fields are saturated at `f64::MAX`.
    pub overflow: bool,
    /// `T` has no known value here (custom weight at the origin); `t` is 0.
    pub t_undefined: bool,
}

pub const GRAMMAR: &str = "weight descriptors: freud:<alpha> | erdos:<ell>:<alpha>";

/// Build a [`WeightSpec`] after checking the family parameters.
pub fn make_weight(family: WeightFamily) -> Result<WeightSpec> {
    match family {
        WeightFamily::Freud { alpha } => WeightSpec::freud(alpha),
        WeightFamily::Erdos { ell, alpha } => WeightSpec::erdos(ell, alpha),
        WeightFamily::Custom(c) => WeightSpec::custom(c, None),
    }
}

impl WeightSpec {
    pub fn freud(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::InvalidWeight(format!(
                "freud alpha = {alpha}: class condition T >= Lambda > 1 violated (T is identically alpha)"
            )));
        }
        Ok(Self {
            family: WeightFamily::Freud { alpha },
            lambda_lower: alpha,
            freud_type: true,
            descriptor: format!("freud:{alpha}"),
            mrs_cache: Arc::default(),
        })
    }

    pub fn erdos(ell: u32, alpha: f64) -> Result<Self> {
        if ell < 1 {
            return Err(Error::InvalidWeight(
                "erdos requires ell >= 1 (ell = 0 is the freud family)".into(),
            ));
        }
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::InvalidWeight(format!(
                "erdos alpha = {alpha}: class condition T >= Lambda > 1 violated"
            )));
        }
        Ok(Self {
            family: WeightFamily::Erdos { ell, alpha },
            lambda_lower: alpha,
            freud_type: false,
            descriptor: format!("erdos:{ell}:{alpha}"),
            mrs_cache: Arc::default(),
        })
    }

    /// Custom weight. When `lambda_lower` is omitted it is estimated as the
    /// minimum of `T` on a default grid; the Freud/Erdős flag is always taken
    /// from the growth of `T` on that grid.
    pub fn custom(weight: CustomWeight, lambda_lower: Option<f64>) -> Result<Self> {
        let descriptor = format!("custom:{}", weight.name);
        let mut spec = Self {
            family: WeightFamily::Custom(weight),
            lambda_lower: 0.0,
            freud_type: true,
            descriptor,
            mrs_cache: Arc::default(),
        };
        let grid = geometric_grid(0.1, 10.0, 100);
        let report = validate_class(&spec, &grid)?;
        spec.lambda_lower = lambda_lower.unwrap_or(report.t_min);
        spec.freud_type = report.classification == Classification::Freud;
        Ok(spec)
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    /// The constant `Lambda` with `T >= Lambda`.
    pub fn lambda_lower(&self) -> f64 {
        self.lambda_lower
    }

    pub fn is_freud_type(&self) -> bool {
        self.freud_type
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub(crate) fn mrs_cache(&self) -> &MrsCache {
        &self.mrs_cache
    }

    pub fn eval(&self, x: f64) -> WeightEval {
        weight_eval(self, x)
    }

    pub fn q(&self, x: f64) -> f64 {
        self.eval(x).q
    }

    pub fn w(&self, x: f64) -> f64 {
        self.eval(x).w
    }

    /// `T(x) = x Q'(x) / Q(x)`, with its limit at the origin.
    pub fn t(&self, x: f64) -> f64 {
        self.eval(x).t
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {p:?} in {s:?}; {GRAMMAR}")))
        };
        match parts.as_slice() {
            ["freud", a] => Self::freud(num(a)?),
            ["erdos", l, a] => {
                let ell = l
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad ell {l:?} in {s:?}; {GRAMMAR}")))?;
                Self::erdos(ell, num(a)?)
            }
            _ => Err(Error::Parse(format!("unknown weight {s:?}; {GRAMMAR}"))),
        }
    }
}

fn saturated(x: f64, alpha_limit: f64) -> WeightEval {
    WeightEval {
        q: f64::MAX,
        qp: f64::MAX.copysign(x),
        qpp: f64::MAX,
        t: if alpha_limit.is_finite() { f64::MAX } else { 0.0 },
        w: 0.0,
        overflow: true,
        t_undefined: false,
    }
}

fn finite_or_max(v: f64) -> (f64, bool) {
    if v.is_finite() {
        (v, false)
    } else {
        (f64::MAX.copysign(v), true)
    }
}

/// Evaluate `Q`, `Q'`, `Q''`, `T` and `w` at `x`.
pub fn weight_eval(spec: &WeightSpec, x: f64) -> WeightEval {
    let ax = x.abs();
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    match &spec.family {
        WeightFamily::Freud { alpha } => {
            let alpha = *alpha;
            if ax == 0.0 {
                let qpp = if alpha == 2.0 {
                    2.0
                } else if alpha > 2.0 {
                    0.0
                } else {
                    f64::MAX
                };
                return WeightEval {
                    q: 0.0,
                    qp: 0.0,
                    qpp,
                    t: alpha,
                    w: 1.0,
                    overflow: false,
                    t_undefined: false,
                };
            }
            let q = ax.powf(alpha);
            if !q.is_finite() {
                return saturated(x, alpha);
            }
            let (qp, o1) = finite_or_max(sign * alpha * ax.powf(alpha - 1.0));
            let (qpp, o2) = finite_or_max(alpha * (alpha - 1.0) * ax.powf(alpha - 2.0));
            WeightEval {
                q,
                qp,
                qpp,
                t: alpha,
                w: (-q).exp(),
                overflow: o1 || o2,
                t_undefined: false,
            }
        }
        WeightFamily::Erdos { ell, alpha } => erdos_eval(*ell, *alpha, x),
        WeightFamily::Custom(c) => {
            let q = (c.q)(x);
            let qp = (c.qp)(x);
            let qpp = (c.qpp)(x);
            if !q.is_finite() || q > f64::MAX {
                return saturated(x, 1.0);
            }
            let (t, t_undefined) = if x == 0.0 || q == 0.0 {
                match c.t_at_zero {
                    Some(t0) => (t0, false),
                    None => (0.0, true),
                }
            } else {
                (x * qp / q, false)
            };
            let (qp, o1) = finite_or_max(qp);
            let (qpp, o2) = finite_or_max(qpp);
            WeightEval {
                q,
                qp,
                qpp,
                t,
                w: (-q).exp(),
                overflow: o1 || o2,
                t_undefined,
            }
        }
    }
}

/// Erdős tower evaluated with the chain rule.
///
/// With `y_0 = |x|^alpha`, `y_j = exp(y_{j-1})` and `D_j = y_1 ... y_j`,
/// `Q' = alpha |x|^(alpha-1) D_l` and
/// `Q'' = D_l (alpha (alpha-1) |x|^(alpha-2) + (alpha |x|^(alpha-1))^2 (D_0 + ... + D_{l-1}))`.
/// `Q` itself is accumulated as `y_j - exp_j(0) = exp_j(0) expm1(y_{j-1} - exp_{j-1}(0))`
/// so that small arguments keep full relative accuracy.
fn erdos_eval(ell: u32, alpha: f64, x: f64) -> WeightEval {
    let ax = x.abs();
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let y0 = ax.powf(alpha);
    let mut y = y0; // y_j
    let mut base = 0.0; // exp_j(0)
    let mut diff = y0; // y_j - exp_j(0)
    let mut prod = 1.0; // D_j
    let mut prod_sum = 0.0; // D_0 + ... + D_{j-1}
    for _ in 0..ell {
        prod_sum += prod;
        let next_base: f64 = f64::exp(base);
        diff = next_base * diff.exp_m1();
        y = y.exp();
        base = next_base;
        prod *= y;
    }
    if !diff.is_finite() || !y.is_finite() {
        return saturated(x, alpha);
    }
    let q = diff;
    if ax == 0.0 {
        // D_l(0) = exp_1(0) ... exp_l(0)
        let qpp = if alpha == 2.0 {
            2.0 * prod
        } else if alpha > 2.0 {
            0.0
        } else {
            f64::MAX
        };
        return WeightEval {
            q: 0.0,
            qp: 0.0,
            qpp,
            t: alpha,
            w: 1.0,
            overflow: false,
            t_undefined: false,
        };
    }
    let inner1 = alpha * ax.powf(alpha - 1.0);
    let inner2 = alpha * (alpha - 1.0) * ax.powf(alpha - 2.0);
    let (qp, o1) = finite_or_max(sign * inner1 * prod);
    let (qpp, o2) = finite_or_max(prod * (inner2 + inner1 * inner1 * prod_sum));
    // T = alpha y0 D_l / (y_l - exp_l(0))
    let t = if y0 == 0.0 || q == 0.0 {
        alpha
    } else {
        let v = alpha * y0 * prod / q;
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    };
    WeightEval {
        q,
        qp,
        qpp,
        t,
        w: (-q).exp(),
        overflow: o1 || o2,
        t_undefined: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Freud,
    Erdos,
}

/// Outcome of one class condition on the sampled grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub condition: char,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub checks: Vec<ConditionCheck>,
    pub even: bool,
    pub t_min: f64,
    pub t_max: f64,
    /// Observed `sup_{x < y} T(x) / T(y)` on the grid.
    pub quasi_increasing_constant: f64,
    /// Observed supremum of `Q'' Q / Q'^2` (upper constant of condition (e)).
    pub ratio_e_sup: f64,
    /// Observed infimum of the same ratio for `|x| > 1`; positive values are
    /// consistent with the stronger `C^2+` class.
    pub ratio_e_inf_outside: f64,
    pub classification: Classification,
    pub overflow_points: usize,
}

impl ClassReport {
    pub fn all_passed(&self) -> bool {
        self.even && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, condition: char) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Growth factor of `T` over the grid above which a weight is reported as
/// Erdős-type.
pub const ERDOS_GROWTH_FACTOR: f64 = 10.0;

/// Check conditions (a)–(e) of the exponential weight class on a grid of
/// positive abscissae. Failures are reported, not raised; only a malformed
/// grid is an error.
pub fn validate_class(spec: &WeightSpec, grid: &[f64]) -> Result<ClassReport> {
    if grid.is_empty() {
        return Err(Error::Domain("validation grid is empty".into()));
    }
    if grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Domain("validation grid must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("validation grid must be strictly increasing".into()));
    }
    let at0 = spec.eval(0.0);
    let evals: Vec<(f64, WeightEval)> = grid
        .iter()
        .map(|&x| (x, spec.eval(x)))
        .filter(|(_, e)| !e.overflow)
        .collect();
    let overflow_points = grid.len() - evals.len();

    let even = grid.iter().all(|&x| {
        let (p, m) = (spec.eval(x), spec.eval(-x));
        p.overflow && m.overflow || (p.q - m.q).abs() <= 1e-12 * p.q.abs().max(1e-300)
    });

    let mut checks = Vec::new();

    let qp_finite = evals.iter().all(|(_, e)| e.qp.is_finite());
    checks.push(ConditionCheck {
        condition: 'a',
        passed: at0.q.abs() <= 1e-14 && qp_finite,
        detail: format!("Q(0) = {:e}", at0.q),
    });

    let min_qpp = evals.iter().map(|(_, e)| e.qpp).fold(f64::INFINITY, f64::min);
    checks.push(ConditionCheck {
        condition: 'b',
        passed: min_qpp > 0.0,
        detail: format!("min Q'' on grid = {min_qpp:e}"),
    });

    let increasing = evals.windows(2).all(|w| w[1].1.q > w[0].1.q);
    let grows = evals.len() < 2 || evals.last().map(|l| l.1.q) > evals.first().map(|f| f.1.q);
    checks.push(ConditionCheck {
        condition: 'c',
        passed: increasing && grows,
        detail: format!("Q strictly increasing on grid: {increasing}"),
    });

    let ts: Vec<f64> = evals.iter().map(|(_, e)| e.t).collect();
    let t_min = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut quasi = 1.0f64;
    let mut running_max = f64::NEG_INFINITY;
    for &t in &ts {
        if running_max > 0.0 && t > 0.0 {
            quasi = quasi.max(running_max / t);
        }
        running_max = running_max.max(t);
    }
    let lambda_ok = t_min >= spec.lambda_lower * (1.0 - 1e-12);
    checks.push(ConditionCheck {
        condition: 'd',
        passed: t_min > 1.0 + 1e-12 && lambda_ok,
        detail: format!(
            "min T = {t_min}, Lambda = {}, quasi-increasing constant = {quasi}",
            spec.lambda_lower
        ),
    });

    let mut ratio_sup = 0.0f64;
    let mut ratio_inf_out = f64::INFINITY;
    for (x, e) in &evals {
        if e.qp == 0.0 {
            continue;
        }
        let r = e.qpp * e.q / (e.qp * e.qp);
        if r.is_finite() {
            ratio_sup = ratio_sup.max(r);
            if *x > 1.0 {
                ratio_inf_out = ratio_inf_out.min(r);
            }
        } else {
            ratio_sup = f64::INFINITY;
        }
    }
    checks.push(ConditionCheck {
        condition: 'e',
        passed: ratio_sup.is_finite(),
        detail: format!("sup Q''Q/Q'^2 = {ratio_sup}"),
    });

    let t_ref = evals
        .iter()
        .find(|(x, _)| *x >= 1.0)
        .or(evals.first())
        .map(|(_, e)| e.t)
        .unwrap_or(f64::NAN);
    let growth = t_max / t_ref;
    let classification = if growth > ERDOS_GROWTH_FACTOR {
        Classification::Erdos
    } else {
        Classification::Freud
    };

    Ok(ClassReport {
        checks,
        even,
        t_min,
        t_max,
        quasi_increasing_constant: quasi,
        ratio_e_sup: ratio_sup,
        ratio_e_inf_outside: ratio_inf_out,
        classification,
        overflow_points,
    })
}

/// `count` points from `lo` to `hi` in geometric progression.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (r * i as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn freud_two_at_one() {
        let spec = WeightSpec::freud(2.0).unwrap();
        let e = spec.eval(1.0);
        assert_eq!(e.q, 1.0);
        assert_eq!(e.qp, 2.0);
        assert_eq!(e.t, 2.0);
        assert_relative_eq!(e.w, 0.367_879_441_171_442_3, max_relative = 1e-15);
    }

    #[test]
    fn erdos_values() {
        let spec = WeightSpec::erdos(1, 2.0).unwrap();
        let e = spec.eval(1.0);
        let ee = std::f64::consts::E;
        assert_relative_eq!(e.q, ee - 1.0, max_relative = 1e-15);
        assert_relative_eq!(e.t, 2.0 * ee / (ee - 1.0), max_relative = 1e-14);
        assert_relative_eq!(e.t, 3.163_953_413_738_653, max_relative = 1e-12);
    }

    #[test]
    fn origin_is_normalized() {
        for spec in [
            WeightSpec::freud(2.0).unwrap(),
            WeightSpec::freud(1.5).unwrap(),
            WeightSpec::erdos(1, 2.0).unwrap(),
            WeightSpec::erdos(2, 3.0).unwrap(),
        ] {
            let e = spec.eval(0.0);
            assert_eq!(e.q, 0.0);
            assert_eq!(e.w, 1.0);
            assert_eq!(e.t, spec.lambda_lower());
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let err = WeightSpec::freud(0.5).unwrap_err();
        assert!(err.to_string().contains("T >= Lambda > 1"));
        assert!(WeightSpec::freud(1.0).is_err());
        assert!(WeightSpec::erdos(0, 2.0).is_err());
        assert!(WeightSpec::erdos(1, 1.0).is_err());
    }

    #[test]
    fn descriptor_grammar() {
        let s: WeightSpec = "freud:2".parse().unwrap();
        assert_eq!(s.descriptor(), "freud:2");
        let s: WeightSpec = "erdos:1:2".parse().unwrap();
        assert_eq!(s.descriptor(), "erdos:1:2");
        assert!("freud".parse::<WeightSpec>().is_err());
        assert!("hermite:2".parse::<WeightSpec>().is_err());
        assert!("erdos:-1:2".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn overflow_saturates() {
        let spec = WeightSpec::erdos(1, 2.0).unwrap();
        let e = spec.eval(40.0);
        assert!(e.overflow);
        assert_eq!(e.w, 0.0);
        assert!(e.q.is_finite() && e.qp.is_finite() && e.t.is_finite());
        let e = WeightSpec::erdos(2, 2.0).unwrap().eval(3.0);
        assert!(e.overflow && e.w == 0.0);
    }

    #[test]
    fn validate_known_families() {
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
        let r = validate_class(&WeightSpec::freud(2.0).unwrap(), &grid).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert_eq!(r.classification, Classification::Freud);

        let grid: Vec<f64> = (1..=50).map(|i| i as f64 * 0.1).collect();
        let spec = WeightSpec::erdos(1, 2.0).unwrap();
        let r = validate_class(&spec, &grid).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!(spec.t(5.0) / spec.t(1.0) > 10.0);
        assert_eq!(r.classification, Classification::Erdos);
    }

    #[test]
    fn custom_abs_fails_condition_d() {
        let cw = CustomWeight {
            name: "abs".into(),
            q: Arc::new(|x: f64| x.abs()),
            qp: Arc::new(|x: f64| x.signum()),
            qpp: Arc::new(|_| 0.0),
            t_at_zero: Some(1.0),
        };
        let spec = WeightSpec::custom(cw, None).unwrap();
        let grid = geometric_grid(0.1, 10.0, 40);
        let r = validate_class(&spec, &grid).unwrap();
        assert!(!r.check('d').unwrap().passed);
        assert!(!r.all_passed());
        assert_eq!(spec.eval(0.0).t, 1.0);
    }

    #[test]
    fn custom_matches_builtin() {
        let cw = CustomWeight {
            name: "x4".into(),
            q: Arc::new(|x: f64| x.powi(4)),
            qp: Arc::new(|x: f64| 4.0 * x.powi(3)),
            qpp: Arc::new(|x: f64| 12.0 * x * x),
            t_at_zero: None,
        };
        let spec = WeightSpec::custom(cw, None).unwrap();
        assert!(spec.is_freud_type());
        assert_relative_eq!(spec.lambda_lower(), 4.0, max_relative = 1e-12);
        assert!(spec.eval(0.0).t_undefined);
        let grid = geometric_grid(0.1, 10.0, 40);
        assert!(validate_class(&spec, &grid).unwrap().all_passed());
    }

    #[test]
    fn bad_grid_is_an_error() {
        let spec = WeightSpec::freud(2.0).unwrap();
        assert!(validate_class(&spec, &[]).is_err());
        assert!(validate_class(&spec, &[1.0, 0.5]).is_err());
        assert!(validate_class(&spec, &[-1.0, 0.5]).is_err());
    }

    #[test]
    fn erdos_t_monotone_on_unit_and_beyond() {
        for spec in [WeightSpec::erdos(1, 2.0).unwrap(), WeightSpec::erdos(2, 1.5).unwrap()] {
            let grid: Vec<f64> = (0..200).map(|i| 1.0 + i as f64 * 0.01).collect();
            let ts: Vec<f64> = grid.iter().map(|&x| spec.t(x)).collect();
            assert!(ts.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    proptest! {
        #[test]
        fn q_is_even(x in -6.0f64..6.0, which in 0usize..4) {
            let spec = [
                WeightSpec::freud(2.0).unwrap(),
                WeightSpec::freud(3.3).unwrap(),
                WeightSpec::erdos(1, 2.0).unwrap(),
                WeightSpec::erdos(2, 1.5).unwrap(),
            ][which].clone();
            let (p, m) = (spec.eval(x), spec.eval(-x));
            prop_assert_eq!(p.q, m.q);
            prop_assert_eq!(p.qp, -m.qp);
        }

        #[test]
        fn erdos_chain_rule_matches_finite_difference(x in 0.1f64..3.0, sign in prop::bool::ANY, ell in 1u32..3) {
            let x = if sign { x } else { -x };
            let alpha = 2.0;
            if ell == 2 && x.abs() > 1.6 {
                return Ok(());
            }
            let spec = WeightSpec::erdos(ell, alpha).unwrap();
            let h = 1e-6;
            let fd = (spec.q(x + h) - spec.q(x - h)) / (2.0 * h);
            let e = spec.eval(x);
            prop_assert!((fd - e.qp).abs() <= 1e-5 * e.qp.abs(), "fd {} vs {}", fd, e.qp);
            let fd2 = (spec.eval(x + h).qp - spec.eval(x - h).qp) / (2.0 * h);
            prop_assert!((fd2 - e.qpp).abs() <= 1e-5 * e.qpp.abs(), "fd2 {} vs {}", fd2, e.qpp);
        }

        #[test]
        fn freud_t_is_alpha(x in -50.0f64..50.0, alpha in 1.01f64..6.0) {
            prop_assume!(x != 0.0);
            let spec = WeightSpec::freud(alpha).unwrap();
            let e = spec.eval(x);
            prop_assert_eq!(e.t, alpha);
            prop_assert!((e.t * e.q - x * e.qp).abs() <= 1e-12 * (x * e.qp).abs());
            prop_assert_eq!(e.w, (-e.q).exp());
        }
    }
}
