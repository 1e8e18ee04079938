//! Pointwise-convergence bounds, convergence experiments and the suite of
//! scale-free checks on the asymptotic relations the bounds rely on.
//!
//! Every `~` relation carries unknown constants, so the suite reports the
//! observed range of each scale-free ratio and whether it stays inside a
//! configured bracket; it certifies boundedness, not values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvfun::{v_delta, weighted_by_power, BVFunction, Interval};
use crate::error::{Error, Result};
use crate::fourier::{coefficients, partial_sum, tail_integral_grid};
use crate::mrs::{mrs_a, mrs_number, phi_u};
use crate::orthopoly::{
    christoffel, gauss_rule, recurrence_table, weighted_values, DiscretizationConfig,
    RecurrenceTable,
};
use crate::weights::{geometric_grid, WeightSpec};

/// Which pointwise bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Four-term bound for Erdős-type weights, `0 < delta < 1`.
    ErdosJs,
    /// Two-term bound for Freud-type weights, `delta = 1`.
    MhaskarFreud,
}

impl Mode {
    pub fn for_weight(spec: &WeightSpec) -> Self {
        if spec.is_freud_type() {
            Mode::MhaskarFreud
        } else {
            Mode::ErdosJs
        }
    }
}

/// Shape of the local variation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// `(1/n) sum_{k=1}^n V_delta([x - a_n/k, x + a_n/k])`.
    KSum,
    /// `sqrt(a_n/n) V_delta([x - a_n, x + a_n]) + V_delta([x - h, x + h])`,
    /// `h = sqrt(a_n/n)`; dominates the k-sum.
    Split,
}

/// What to do when `x` lies outside the bound's standing range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    Enforce,
    /// Evaluate anyway and clear `in_standing_range`.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub delta: f64,
    pub d: f64,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    /// Outer cut `|u| >= c1 a_n` of the Freud bound.
    pub c1: f64,
}

impl TheoremConstants {
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            delta: match mode {
                Mode::ErdosJs => 0.5,
                Mode::MhaskarFreud => 1.0,
            },
            d: 0.5,
            c: 1.0,
            big_c: 1.0,
            c1: 1.0,
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        let all = [self.delta, self.d, self.c, self.big_c, self.c1];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain(format!("constants must be positive: {self:?}")));
        }
        if self.d > 1.0 {
            return Err(Error::Domain(format!("d = {} must lie in (0, 1]", self.d)));
        }
        match mode {
            Mode::ErdosJs if self.delta >= 1.0 => Err(Error::Domain(format!(
                "delta = {} must lie in (0, 1) for Erdős-type weights",
                self.delta
            ))),
            Mode::MhaskarFreud if self.delta != 1.0 => Err(Error::Domain(format!(
                "delta = {} must equal 1 for Freud-type weights",
                self.delta
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RhsComponents {
    pub variation_sum_term: f64,
    pub w_delta_integral_term: f64,
    pub w_integral_inner_term: f64,
    pub w_integral_outer_term: f64,
}

impl RhsComponents {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.variation_sum_term,
            self.w_delta_integral_term,
            self.w_integral_inner_term,
            self.w_integral_outer_term,
        ]
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsBreakdown {
    pub mode: Mode,
    pub form: RhsForm,
    pub n: usize,
    pub x: f64,
    pub a_n: f64,
    /// `exp(c x Q'(x))`.
    pub envelope: f64,
    pub components: RhsComponents,
    /// `C * envelope * sum(components)`.
    pub rhs_total: f64,
    pub in_standing_range: bool,
    /// `a_{dn}/6` (Erdős) or `c x Q'(x)` as a lower bound on `n` (Freud).
    pub standing_limit: f64,
    /// Truncation and quadrature slack of the variation integrals.
    pub remainder: f64,
}

fn local_term(
    spec: &WeightSpec,
    f: &BVFunction,
    x: f64,
    n: usize,
    a_n: f64,
    delta: f64,
    form: RhsForm,
    rem: &mut f64,
) -> Result<f64> {
    let mut v = |r: f64| -> Result<f64> {
        let var = weighted_by_power(spec, f, Interval::around(x, r), delta)?;
        *rem += var.remainder;
        Ok(var.value)
    };
    match form {
        RhsForm::KSum => {
            let mut s = 0.0;
            for k in 1..=n {
                s += v(a_n / k as f64)?;
            }
            Ok(s / n as f64)
        }
        RhsForm::Split => {
            let h = (a_n / n as f64).sqrt();
            Ok(h * v(a_n)? + v(h)?)
        }
    }
}

fn outside(spec: &WeightSpec, f: &BVFunction, r: f64, p: f64, rem: &mut f64) -> Result<f64> {
    let lo = weighted_by_power(spec, f, Interval::new(f64::NEG_INFINITY, -r), p)?;
    let hi = weighted_by_power(spec, f, Interval::new(r, f64::INFINITY), p)?;
    *rem += lo.remainder + hi.remainder;
    Ok(lo.value + hi.value)
}

fn inside(spec: &WeightSpec, f: &BVFunction, r: f64, p: f64, rem: &mut f64) -> Result<f64> {
    let v = weighted_by_power(spec, f, Interval::new(-r, r), p)?;
    *rem += v.remainder;
    Ok(v.value)
}

/// The four bracketed terms of the Erdős-type bound, without any class or
/// range checks. Returns the components and the accumulated remainder.
pub fn theorem_terms(
    spec: &WeightSpec,
    f: &BVFunction,
    x: f64,
    n: usize,
    k: &TheoremConstants,
    form: RhsForm,
) -> Result<(RhsComponents, f64)> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let nf = n as f64;
    let a_n = mrs_a(spec, nf)?;
    let a_dn = mrs_a(spec, k.d * nf)?;
    let a_half = mrs_a(spec, 0.5 * k.d * nf)?;
    let t4 = spec.t(a_n).powf(0.25);
    let mut rem = 0.0;
    let c = RhsComponents {
        variation_sum_term: local_term(spec, f, x, n, a_n, k.delta, form, &mut rem)?,
        w_delta_integral_term: inside(spec, f, a_dn, k.delta, &mut rem)? / nf,
        w_integral_inner_term: inside(spec, f, a_half, 1.0, &mut rem)? / (nf * t4),
        w_integral_outer_term: outside(spec, f, a_half, 1.0, &mut rem)? / t4,
    };
    Ok((c, rem))
}

/// Right-hand side of the pointwise bound for `|s_n(f, x) - f(x)|`.
#[allow(clippy::too_many_arguments)]
pub fn theorem_rhs(
    spec: &WeightSpec,
    f: &BVFunction,
    x: f64,
    n: usize,
    k: &TheoremConstants,
    mode: Mode,
    form: RhsForm,
    policy: RangePolicy,
) -> Result<RhsBreakdown> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    k.validate(mode)?;
    match (mode, spec.is_freud_type()) {
        (Mode::ErdosJs, true) => {
            return Err(Error::Domain(format!(
                "{} is Freud-type; the Erdős-type bound does not apply",
                spec.descriptor()
            )))
        }
        (Mode::MhaskarFreud, false) => {
            return Err(Error::Domain(format!(
                "{} is Erdős-type; the Freud bound does not apply",
                spec.descriptor()
            )))
        }
        _ => {}
    }
    let total = v_delta(spec, f, Interval::REAL, k.delta)?;
    if !total.value.is_finite() {
        return Err(Error::InvalidBv(format!(
            "{} has infinite weighted variation for delta = {}",
            f.descriptor(),
            k.delta
        )));
    }
    let nf = n as f64;
    let a_n = mrs_a(spec, nf)?;
    let xqp = x * spec.eval(x).qp;
    let (standing_limit, in_range) = match mode {
        Mode::ErdosJs => {
            let lim = mrs_a(spec, k.d * nf)? / 6.0;
            (lim, x.abs() <= lim)
        }
        Mode::MhaskarFreud => {
            let lim = k.c * xqp;
            (lim, nf >= lim)
        }
    };
    if !in_range && policy == RangePolicy::Enforce {
        return Err(Error::NTooSmall {
            n,
            x,
            limit: standing_limit,
        });
    }
    let (components, remainder) = match mode {
        Mode::ErdosJs => theorem_terms(spec, f, x, n, k, form)?,
        Mode::MhaskarFreud => {
            let mut rem = 0.0;
            let c = RhsComponents {
                variation_sum_term: local_term(spec, f, x, n, a_n, 1.0, form, &mut rem)?,
                w_integral_outer_term: outside(spec, f, k.c1 * a_n, 1.0, &mut rem)?,
                ..Default::default()
            };
            (c, rem)
        }
    };
    let envelope = (k.c * xqp).exp();
    Ok(RhsBreakdown {
        mode,
        form,
        n,
        x,
        a_n,
        envelope,
        rhs_total: k.big_c * envelope * components.sum(),
        components,
        in_standing_range: in_range,
        standing_limit,
        remainder,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub x: f64,
    pub s_n: f64,
    pub f_x: f64,
    pub abs_error: f64,
    /// `s_n` holds `s_n(f, x) w(x)` because `w(x)` underflowed.
    pub weighted_value: bool,
    pub rhs_total: f64,
    pub rhs_components: RhsComponents,
    pub in_standing_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub x: f64,
    pub first_n: usize,
    pub last_n: usize,
    pub first_error: f64,
    pub last_error: f64,
    /// Smallest error seen over the whole `n` list.
    pub min_error: f64,
    /// `min_error < first_error`.
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub weight: String,
    pub f: String,
    pub mode: Mode,
    pub form: RhsForm,
    pub constants: TheoremConstants,
    pub note: String,
    pub rows: Vec<ConvergenceRow>,
    pub summaries: Vec<PointSummary>,
}

pub const CSV_HEADER: &str =
    "weight,f,x,n,s_n,f_x,abs_error,rhs_total,term1,term2,term3,term4";

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let c = r.rhs_components.as_array();
            out.push_str(&format!(
                "{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.weight,
                self.f,
                r.x,
                r.n,
                r.s_n,
                r.f_x,
                r.abs_error,
                r.rhs_total,
                c[0],
                c[1],
                c[2],
                c[3]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    pub form: RhsForm,
    pub policy: RangePolicy,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            form: RhsForm::Split,
            policy: RangePolicy::Report,
        }
    }
}

/// [`convergence_experiment_with`] on a freshly built table.
pub fn convergence_experiment(
    spec: &WeightSpec,
    f: &BVFunction,
    x_list: &[f64],
    n_list: &[usize],
    k: &TheoremConstants,
    opts: ExperimentOptions,
) -> Result<ConvergenceReport> {
    let n_max = n_list.iter().copied().max().unwrap_or(1);
    let table = recurrence_table(spec, n_max, &DiscretizationConfig::default())?;
    convergence_experiment_with(&table, spec, f, x_list, n_list, k, opts)
}

/// `s_n(f, x)` against `f(x)` and the bound for every `(n, x)`; rows are
/// sorted by `(n, x)`.
pub fn convergence_experiment_with(
    table: &RecurrenceTable,
    spec: &WeightSpec,
    f: &BVFunction,
    x_list: &[f64],
    n_list: &[usize],
    k: &TheoremConstants,
    opts: ExperimentOptions,
) -> Result<ConvergenceReport> {
    if n_list.is_empty() || x_list.is_empty() {
        return Err(Error::Domain("need at least one n and one x".into()));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("n list must be positive and increasing".into()));
    }
    for &x in x_list {
        if !x.is_finite() {
            return Err(Error::Domain(format!("x = {x} is not finite")));
        }
        if !f.is_continuous_at(x) {
            return Err(Error::Domain(format!(
                "x = {x} is a jump of {}; pointwise convergence needs a continuity point",
                f.descriptor()
            )));
        }
    }
    let mode = Mode::for_weight(spec);
    k.validate(mode)?;
    let n_max = *n_list.last().expect("non-empty");
    let coeffs = coefficients(table, spec, f, n_max)?;
    let mut xs = x_list.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let cells: Vec<(usize, f64)> = n_list
        .iter()
        .flat_map(|&n| xs.iter().map(move |&x| (n, x)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, x)| -> Result<ConvergenceRow> {
            let s = partial_sum(&coeffs, table, spec, n, x)?;
            let f_x = f.eval(x);
            let rhs = theorem_rhs(spec, f, x, n, k, mode, opts.form, opts.policy)?;
            let abs_error = if s.weighted {
                (s.value - f_x * spec.w(x)).abs()
            } else {
                (s.value - f_x).abs()
            };
            Ok(ConvergenceRow {
                n,
                x,
                s_n: s.value,
                f_x,
                abs_error,
                weighted_value: s.weighted,
                rhs_total: rhs.rhs_total,
                rhs_components: rhs.components,
                in_standing_range: rhs.in_standing_range,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = xs
        .iter()
        .map(|&x| {
            let errs: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.x == x).collect();
            let first = errs.first().expect("one row per n");
            let last = errs.last().expect("one row per n");
            let min_error = errs.iter().map(|r| r.abs_error).fold(f64::INFINITY, f64::min);
            PointSummary {
                x,
                first_n: first.n,
                last_n: last.n,
                first_error: first.abs_error,
                last_error: last.abs_error,
                min_error,
                improved: min_error < first.abs_error,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        weight: spec.descriptor().to_string(),
        f: f.descriptor().to_string(),
        mode,
        form: opts.form,
        constants: *k,
        note: "the bound is compared against |s_n(f,x) - f(x)|; the k-sum form bounds |s_n(f,x)| \
               after normalising f(x) = 0"
            .into(),
        rows,
        summaries,
    })
}

/// How an entry's observed range is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bracket {
    /// `[lo, hi]`.
    Range { lo: f64, hi: f64 },
    /// Only `max <= hi` matters.
    Upper { hi: f64 },
    /// Recorded, never judged.
    Record,
}

impl Bracket {
    fn holds(&self, min: f64, max: f64) -> bool {
        if !(min.is_finite() && max.is_finite()) {
            return false;
        }
        match *self {
            Bracket::Range { lo, hi } => min >= lo && max <= hi,
            Bracket::Upper { hi } => max <= hi,
            Bracket::Record => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaEntry {
    pub name: String,
    /// Degree the entry belongs to; `None` for checks over the `t` grid.
    pub n: Option<usize>,
    pub min: f64,
    pub max: f64,
    pub bracket: Bracket,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub weight: String,
    pub seed: u64,
    pub bracket: f64,
    pub entries: Vec<LemmaEntry>,
    /// `(d, Q(a_{dn}) / Q(a_n))` at the largest `n`, `d` decreasing.
    pub q_ratio_profile: Vec<(f64, f64)>,
    pub q_ratio_decreasing: bool,
}

impl LemmaReport {
    pub fn entry(&self, name: &str, n: Option<usize>) -> Option<&LemmaEntry> {
        self.entries.iter().find(|e| e.name == name && e.n == n)
    }

    pub fn all_passed(&self) -> bool {
        self.q_ratio_decreasing && self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> Vec<&LemmaEntry> {
        self.entries.iter().filter(|e| !e.pass).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaConfig {
    pub bracket: f64,
    /// Points per evaluation grid (raised to `20 n` for sup norms).
    pub grid_points: usize,
    pub t_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub delta: f64,
    pub d: f64,
    /// Required tail-to-interior ratio for random polynomials at `n >= 32`.
    pub restricted_tol: f64,
    pub tail_bound: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            bracket: 20.0,
            grid_points: 400,
            t_grid: geometric_grid(1.0, 512.0, 19),
            samples: 20,
            seed: 42,
            delta: 0.5,
            d: 0.5,
            restricted_tol: 1e-3,
            tail_bound: 50.0,
        }
    }
}

struct Collector {
    entries: Vec<LemmaEntry>,
}

impl Collector {
    fn push(&mut self, name: &str, n: Option<usize>, values: &[f64], bracket: Bracket) {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pass = !values.is_empty() && bracket.holds(min, max);
        self.entries.push(LemmaEntry {
            name: name.into(),
            n,
            min,
            max,
            bracket,
            pass,
        });
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn mrs_entries(spec: &WeightSpec, cfg: &LemmaConfig, out: &mut Collector) -> Result<()> {
    let b = cfg.bracket;
    let two_sided = Bracket::Range { lo: 1.0 / b, hi: b };
    let ts = &cfg.t_grid;
    let at = |t: f64| mrs_number(spec, t);

    let mut scaling = Vec::new();
    let mut growth = Vec::new();
    let mut gap = Vec::new();
    let mut power = Vec::new();
    let lambda = spec.lambda_lower();
    for &t in ts {
        let v = at(t)?;
        let big_t = v.t_at;
        for l in [2.0, 4.0] {
            let w = at(l * t)?;
            scaling.push(w.a / v.a);
            scaling.push(w.t_at / big_t);
        }
        let e = spec.eval(v.a);
        growth.push(e.q * big_t.sqrt() / t);
        growth.push(e.qp * v.a / (t * big_t.sqrt()));
        for alpha in [0.5, 2.0] {
            gap.push(big_t * (1.0 - mrs_a(spec, alpha * t)? / v.a).abs());
        }
        for &r in ts.iter().filter(|&&r| r <= t) {
            power.push((v.a / mrs_a(spec, r)?) / (t / r).powf(1.0 / lambda));
        }
    }
    out.push("mrs_scaling", None, &scaling, Bracket::Range { lo: 1.0, hi: b });
    out.push("mrs_q_growth", None, &growth, two_sided);
    out.push("mrs_gap", None, &gap, two_sided);
    out.push("mrs_power_growth", None, &power, Bracket::Upper { hi: b });

    // Observed exponent of T(a_t) against t; recorded only.
    let first = at(ts[0])?;
    let last = at(*ts.last().expect("non-empty t grid"))?;
    let slope = if last.t > first.t {
        (last.t_at / first.t_at).ln() / (last.t / first.t).ln()
    } else {
        0.0
    };
    out.push("t_growth_exponent", None, &[slope], Bracket::Record);
    Ok(())
}

fn degree_entries(
    spec: &WeightSpec,
    table: &RecurrenceTable,
    n: usize,
    cfg: &LemmaConfig,
) -> Result<Vec<LemmaEntry>> {
    let b = cfg.bracket;
    let two_sided = Bracket::Range { lo: 1.0 / b, hi: b };
    let nf = n as f64;
    let a_n = mrs_a(spec, nf)?;
    let t_an = spec.t(a_n);
    let phi = |x: f64| phi_u(spec, nf, x);
    let mut out = Collector { entries: Vec::new() };
    let some = Some(n);

    let grid = linspace(0.0, a_n, cfg.grid_points);
    let mut chr = Vec::with_capacity(grid.len());
    let mut spacing_t = Vec::with_capacity(grid.len());
    for &x in &grid {
        let lam = christoffel(table, spec, n, x)?;
        let ph = phi(x)?;
        chr.push(lam.weighted / ph);
        spacing_t.push(a_n / nf / spec.t(x).sqrt() / ph);
    }
    out.push("christoffel_vs_phi", some, &chr, two_sided);
    out.push("spacing_vs_T", some, &spacing_t, Bracket::Upper { hi: b });

    let rule = gauss_rule(table, n)?;
    let a_half = mrs_a(spec, 0.5 * nf)?;
    let mut gaps = Vec::new();
    let mut wratio = Vec::new();
    for pair in rule.nodes.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if lo.abs() <= a_half && hi.abs() <= a_half {
            gaps.push((hi - lo) / phi(hi)?);
            wratio.push(spec.w(hi) / spec.w(lo));
        }
    }
    out.push("node_spacing", some, &gaps, two_sided);
    out.push("node_weight_ratio", some, &wratio, two_sided);
    let edge = (t_an * nf).powf(2.0 / 3.0) * (1.0 - rule.x(1) / a_n);
    out.push("edge_gap", some, &[edge], two_sided);

    let dense = linspace(0.0, 1.5 * a_n, cfg.grid_points.max(20 * n));
    let mut sup = 0.0f64;
    let mut edge_weighted = 0.0f64;
    for &x in &dense {
        let q = weighted_values(table, spec, n, x)?[n].abs();
        sup = sup.max(q);
        edge_weighted = edge_weighted.max(q * (x * x - a_n * a_n).abs().powf(0.25));
    }
    out.push("weighted_sup_edge", some, &[edge_weighted], two_sided);
    let global = sup * a_n.sqrt() * (nf * t_an).powf(-1.0 / 6.0);
    out.push("weighted_sup_global", some, &[global], two_sided);

    out.push("gamma_ratio", some, &[table.gamma_ratio(n)? / a_n], two_sided);

    let ratio = restricted_range_ratio(spec, table, n, cfg)?;
    let bracket = if n >= 32 {
        Bracket::Upper {
            hi: cfg.restricted_tol,
        }
    } else {
        Bracket::Record
    };
    out.push("restricted_range", some, &[ratio], bracket);

    let a_dn = mrs_a(spec, cfg.d * nf)?;
    let ts = linspace(0.0, a_dn, cfg.grid_points / 4);
    let tails = tail_integral_grid(table, spec, n, &ts)?;
    let scaled: Vec<f64> = ts
        .iter()
        .zip(&tails)
        .map(|(&t, l)| l.value.abs() * nf / (a_n.sqrt() * (-cfg.delta * spec.q(t)).exp()))
        .collect();
    let tail_sup = scaled.iter().copied().fold(0.0, f64::max);
    out.push(
        "tail_integral",
        some,
        &[tail_sup],
        Bracket::Upper { hi: cfg.tail_bound },
    );
    Ok(out.entries)
}

/// Worst ratio, over seeded random polynomials `P` of degree `n/4`, of
/// `max |P w|` sampled on `|x| >= a_{n/2}` to `max |P w|` over the `n`-point
/// Gauss nodes inside `|x| <= a_{n/4}`.
pub fn restricted_range_ratio(
    spec: &WeightSpec,
    table: &RecurrenceTable,
    n: usize,
    cfg: &LemmaConfig,
) -> Result<f64> {
    let m = (n / 4).max(1);
    let nf = n as f64;
    let a_m = mrs_a(spec, m as f64)?;
    let a_half = mrs_a(spec, 0.5 * nf)?;
    let a_n = mrs_a(spec, nf)?;
    let rule = gauss_rule(table, n)?;
    let inner: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .filter(|x| x.abs() <= a_m)
        .map(|&x| weighted_values(table, spec, m, x))
        .collect::<Result<_>>()?;
    let outer_grid = linspace(a_half, 2.0 * a_n, cfg.grid_points.max(20 * n));
    let outer: Vec<Vec<f64>> = outer_grid
        .iter()
        .flat_map(|&x| [x, -x])
        .map(|x| weighted_values(table, spec, m, x))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(n as u64));
    let mut worst = 0.0f64;
    for _ in 0..cfg.samples {
        let g: Vec<f64> = (0..=m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eval = |q: &Vec<f64>| g.iter().zip(q).map(|(a, b)| a * b).sum::<f64>().abs();
        let num = outer.iter().map(eval).fold(0.0, f64::max);
        let den = inner.iter().map(eval).fold(0.0, f64::max);
        worst = worst.max(num / den);
    }
    Ok(worst)
}

/// Run every check for each `n` in `n_list` (parallel over `n`, reported in
/// input order) plus the `t`-grid checks on the MRS numbers.
pub fn lemma_suite(
    spec: &WeightSpec,
    table: &RecurrenceTable,
    n_list: &[usize],
    cfg: &LemmaConfig,
) -> Result<LemmaReport> {
    if let Some(&bad) = n_list.iter().find(|&&n| n == 0 || n > table.n) {
        return Err(Error::DegreeOutOfRange {
            requested: bad,
            max: table.n,
        });
    }
    if cfg.t_grid.is_empty() {
        return Err(Error::Domain("t grid is empty".into()));
    }
    let mut out = Collector { entries: Vec::new() };
    mrs_entries(spec, cfg, &mut out)?;
    let per_n = n_list
        .par_iter()
        .map(|&n| degree_entries(spec, table, n, cfg))
        .collect::<Result<Vec<_>>>()?;
    out.entries.extend(per_n.into_iter().flatten());

    let n_max = n_list.iter().copied().max().unwrap_or(table.n) as f64;
    let q_an = spec.q(mrs_a(spec, n_max)?);
    let q_ratio_profile = [1.0, 0.75, 0.5, 0.25, 0.125]
        .iter()
        .map(|&d| Ok((d, spec.q(mrs_a(spec, d * n_max)?) / q_an)))
        .collect::<Result<Vec<_>>>()?;
    let q_ratio_decreasing = q_ratio_profile.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(LemmaReport {
        weight: spec.descriptor().to_string(),
        seed: cfg.seed,
        bracket: cfg.bracket,
        entries: out.entries,
        q_ratio_profile,
        q_ratio_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn erdos() -> WeightSpec {
        "erdos:1:2".parse().unwrap()
    }

    #[test]
    fn constants_validation() {
        let e = TheoremConstants::for_mode(Mode::ErdosJs);
        assert!(e.validate(Mode::ErdosJs).is_ok());
        assert!(e.validate(Mode::MhaskarFreud).is_err());
        let m = TheoremConstants::for_mode(Mode::MhaskarFreud);
        assert!(m.validate(Mode::ErdosJs).is_err());
        let bad = TheoremConstants { d: 1.5, ..e };
        assert!(bad.validate(Mode::ErdosJs).is_err());
    }

    #[test]
    fn constant_function_has_zero_rhs() {
        let spec = erdos();
        let k = TheoremConstants::for_mode(Mode::ErdosJs);
        let r = theorem_rhs(
            &spec,
            &BVFunction::constant(2.0),
            0.1,
            16,
            &k,
            Mode::ErdosJs,
            RhsForm::KSum,
            RangePolicy::Report,
        )
        .unwrap();
        assert_eq!(r.components.sum(), 0.0);
        assert_eq!(r.rhs_total, 0.0);
    }

    #[test]
    fn sgn_components_finite_and_positive() {
        let spec = erdos();
        let k = TheoremConstants::for_mode(Mode::ErdosJs);
        let r = theorem_rhs(
            &spec,
            &BVFunction::sgn(),
            1.0,
            64,
            &k,
            Mode::ErdosJs,
            RhsForm::KSum,
            RangePolicy::Report,
        )
        .unwrap();
        let c = r.components.as_array();
        assert!(c[..3].iter().all(|v| v.is_finite() && *v > 0.0), "{c:?}");
        // the only jump sits at 0, inside |u| < a_{dn/2}
        assert_eq!(c[3], 0.0);
        assert!(r.rhs_total > 0.0);
        assert!(!r.in_standing_range);
    }

    #[test]
    fn enforce_policy_rejects_out_of_range() {
        let spec = erdos();
        let k = TheoremConstants::for_mode(Mode::ErdosJs);
        let err = theorem_rhs(
            &spec,
            &BVFunction::sgn(),
            1.0,
            64,
            &k,
            Mode::ErdosJs,
            RhsForm::KSum,
            RangePolicy::Enforce,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NTooSmall { n: 64, .. }));
    }

    #[test]
    fn mode_pairing() {
        let freud: WeightSpec = "freud:2".parse().unwrap();
        let k = TheoremConstants::for_mode(Mode::ErdosJs);
        let f = BVFunction::sgn();
        assert!(theorem_rhs(&freud, &f, 1.0, 8, &k, Mode::ErdosJs, RhsForm::KSum, RangePolicy::Report).is_err());
        let m = TheoremConstants::for_mode(Mode::MhaskarFreud);
        assert!(theorem_rhs(&erdos(), &f, 1.0, 8, &m, Mode::MhaskarFreud, RhsForm::KSum, RangePolicy::Report).is_err());
        let r = theorem_rhs(&freud, &f, 1.0, 8, &m, Mode::MhaskarFreud, RhsForm::KSum, RangePolicy::Report).unwrap();
        assert_eq!(r.components.w_delta_integral_term, 0.0);
        assert!(r.in_standing_range);
    }

    #[test]
    fn split_form_dominates_k_sum() {
        let k = TheoremConstants::for_mode(Mode::ErdosJs);
        for f in ["sgn", "ind:0.5:1.5", "poly:0,1,1"] {
            let f: BVFunction = f.parse().unwrap();
            for n in [8, 32, 128] {
                for x in [0.3, 1.0] {
                    let (ksum, _) = theorem_terms(&erdos(), &f, x, n, &k, RhsForm::KSum).unwrap();
                    let (split, _) = theorem_terms(&erdos(), &f, x, n, &k, RhsForm::Split).unwrap();
                    assert!(split.variation_sum_term >= ksum.variation_sum_term);
                }
            }
        }
    }

    #[test]
    fn experiment_rejects_jump_point() {
        let k = TheoremConstants::for_mode(Mode::ErdosJs);
        let err = convergence_experiment(
            &erdos(),
            &BVFunction::sgn(),
            &[0.0],
            &[4, 8],
            &k,
            ExperimentOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("jump"));
    }

    #[test]
    fn cubic_is_reproduced() {
        let spec: WeightSpec = "freud:2".parse().unwrap();
        let k = TheoremConstants::for_mode(Mode::MhaskarFreud);
        let f: BVFunction = "poly:1,-1,0.5,0.25".parse().unwrap();
        let rep = convergence_experiment(&spec, &f, &[0.5, -1.0], &[4, 8], &k, ExperimentOptions::default())
            .unwrap();
        assert_eq!(rep.rows.len(), 4);
        for r in &rep.rows {
            assert!(r.abs_error < 1e-8, "{r:?}");
        }
        assert_eq!((rep.rows[0].n, rep.rows[0].x), (4, -1.0));
        let csv = rep.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn freud2_exact_ratios() {
        let spec: WeightSpec = "freud:2".parse().unwrap();
        let table = recurrence_table(&spec, 32, &DiscretizationConfig::default()).unwrap();
        let rep = lemma_suite(&spec, &table, &[16, 32], &LemmaConfig::default()).unwrap();
        for n in [16, 32] {
            let g = rep.entry("gamma_ratio", Some(n)).unwrap();
            assert!((g.max - 0.5).abs() < 1e-8);
        }
        // Q(a_t) sqrt(T) / t = sqrt(2) and Q'(a_t) a_t / (t sqrt(T)) = sqrt(2).
        let g = rep.entry("mrs_q_growth", None).unwrap();
        assert!((g.min - 2f64.sqrt()).abs() < 1e-9 && (g.max - 2f64.sqrt()).abs() < 1e-9);
        assert!(rep.q_ratio_decreasing);
    }

    #[test]
    fn ratios_are_grid_independent() {
        let spec = erdos();
        let table = recurrence_table(&spec, 32, &DiscretizationConfig::default()).unwrap();
        let coarse = LemmaConfig::default();
        let fine = LemmaConfig {
            grid_points: 2 * coarse.grid_points,
            ..coarse.clone()
        };
        let a = lemma_suite(&spec, &table, &[32], &coarse).unwrap();
        let b = lemma_suite(&spec, &table, &[32], &fine).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            for (u, v) in [(x.min, y.min), (x.max, y.max)] {
                assert!((u - v).abs() <= 0.1 * u.abs().max(v.abs()), "{}: {u} vs {v}", x.name);
            }
        }
    }
}
