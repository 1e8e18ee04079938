//! Orthonormal polynomials `p_n(w^2, x)` for an exponential weight.
//!
//! The recurrence coefficients come from a Lanczos run on a composite
//! Gauss–Legendre discretization of `w^2 dx`. Working with the vectors
//! `p_k(x_i) sqrt(W_i)` keeps every entry bounded by one, so the edge of the
//! truncated range can never overflow. Evaluation returns the weighted values
//! `q_k = p_k w`, carried through a rescaled recurrence so that neither `p_k`
//! nor `w` needs to be representable on its own.
//!
//! Table convention: `a[k]` (k < N) and `b[k]` (k <= N) satisfy
//! `b[k+1] p_{k+1}(x) = (x - a[k]) p_k(x) - b[k] p_{k-1}(x)` with
//! `p_0 = 1 / b[0]`, so `b[0] = sqrt(mu0)` and `b[n] = gamma_{n-1} / gamma_n`
//! for `n >= 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrs::mrs_a;
use crate::quad::gauss_legendre;
use crate::tridiag::eigen_first_components;
use crate::weights::WeightSpec;

const RESCALE: f64 = 1e100;
const GRADED: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    /// The measure is truncated to `|x| <= a_{c N}`.
    pub truncation_multiple: f64,
    /// Panels on `[0, a_N]`; `None` picks `N/2 + 16`.
    pub panels: Option<usize>,
    pub nodes_per_panel: usize,
    /// Required relative agreement between a discretization and its doubling.
    pub stability_tol: f64,
    /// The truncation radius is raised until `Q(radius) >= tail_q`, so low
    /// degrees do not lose mass to the cut.
    pub tail_q: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            truncation_multiple: 4.0,
            panels: None,
            nodes_per_panel: 24,
            stability_tol: 1e-12,
            tail_q: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMeta {
    pub config: DiscretizationConfig,
    pub radius: f64,
    pub inner_panels: usize,
    pub outer_panels: usize,
    /// Number of discrete support points actually used.
    pub points: usize,
    /// Max relative coefficient change against the half-size discretization.
    pub stability_change: f64,
}

/// Three-term recurrence of the orthonormal system for `w^2 dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceTable {
    pub weight: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub mu0: f64,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    pub disc: DiscretizationMeta,
}

impl RecurrenceTable {
    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.n {
            return Err(Error::DegreeOutOfRange {
                requested: n,
                max: self.n,
            });
        }
        Ok(())
    }

    /// `gamma_{n-1} / gamma_n`.
    pub fn gamma_ratio(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("gamma ratio needs n >= 1".into()));
        }
        self.check_degree(n)?;
        Ok(self.b[n])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let table: Self = serde_json::from_str(s)?;
        if table.a.len() != table.n || table.b.len() != table.n + 1 {
            return Err(Error::Parse(format!(
                "recurrence table for N = {} needs {} A and {} B entries",
                table.n,
                table.n,
                table.n + 1
            )));
        }
        Ok(table)
    }
}

/// Radius of the truncated measure: `max(a_{cN}, Q^{-1}(tail_q))`.
pub fn truncation_radius(spec: &WeightSpec, n: usize, c: f64, tail_q: f64) -> Result<f64> {
    let a = mrs_a(spec, c * n.max(1) as f64)?;
    Ok(a.max(q_inverse(spec, tail_q)))
}

/// Smallest positive `x` with `Q(x) >= level`.
fn q_inverse(spec: &WeightSpec, level: f64) -> f64 {
    let mut hi = 1.0;
    while spec.q(hi) < level {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spec.q(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

struct Discretization {
    x: Vec<f64>,
    sqrt_w: Vec<f64>,
    inner: usize,
    outer: usize,
}

fn discretize(
    spec: &WeightSpec,
    a_n: f64,
    radius: f64,
    inner: usize,
    outer: usize,
    m: usize,
) -> Discretization {
    let rule = gauss_legendre(m);
    let mut edges = Vec::with_capacity(inner + outer + GRADED + 1);
    // Geometric grading towards the origin, where |x|^alpha is not smooth.
    let first = a_n * (std::f64::consts::FRAC_PI_2 / inner as f64).sin();
    edges.push(0.0);
    for j in (1..=GRADED).rev() {
        edges.push(first * 0.5f64.powi(j as i32));
    }
    for j in 1..=inner {
        edges.push(a_n * (std::f64::consts::FRAC_PI_2 * j as f64 / inner as f64).sin());
    }
    *edges.last_mut().expect("non-empty") = a_n;
    for j in 1..=outer {
        let s = j as f64 / outer as f64;
        edges.push(a_n + (radius - a_n) * s * s);
    }
    let mut half_x = Vec::with_capacity(edges.len() * m);
    let mut half_sw = Vec::with_capacity(edges.len() * m);
    for e in edges.windows(2) {
        let (lo, hi) = (e[0], e[1]);
        if hi <= lo {
            continue;
        }
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let x = c + h * t;
            let w = spec.w(x);
            half_x.push(x);
            half_sw.push((wt * h).sqrt() * w);
        }
    }
    let mut x: Vec<f64> = half_x.iter().rev().map(|v| -v).collect();
    x.extend_from_slice(&half_x);
    let mut sqrt_w: Vec<f64> = half_sw.iter().rev().copied().collect();
    sqrt_w.extend_from_slice(&half_sw);
    Discretization {
        x,
        sqrt_w,
        inner,
        outer,
    }
}

struct Coefficients {
    a: Vec<f64>,
    b: Vec<f64>,
    mu0: f64,
}

/// Lanczos on `diag(x)` started from `sqrt(W)`, with one local
/// reorthogonalization pass per step.
fn lanczos(disc: &Discretization, n: usize) -> Result<Coefficients> {
    let m = disc.x.len();
    let mu0: f64 = disc.sqrt_w.iter().map(|s| s * s).sum();
    if !(mu0 > 0.0 && mu0.is_finite()) {
        return Err(Error::PrecisionExhausted {
            degree: 0,
            detail: format!("total mass {mu0}"),
        });
    }
    let norm = mu0.sqrt();
    let mut v: Vec<f64> = disc.sqrt_w.iter().map(|s| s / norm).collect();
    let mut v_prev = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n + 1);
    b.push(norm);
    for k in 0..n {
        let b_k = if k == 0 { 0.0 } else { b[k] };
        for i in 0..m {
            r[i] = disc.x[i] * v[i] - b_k * v_prev[i];
        }
        let mut alpha: f64 = v.iter().zip(&r).map(|(vi, ri)| vi * ri).sum();
        for i in 0..m {
            r[i] -= alpha * v[i];
        }
        let corr: f64 = v.iter().zip(&r).map(|(vi, ri)| vi * ri).sum();
        alpha += corr;
        for i in 0..m {
            r[i] -= corr * v[i];
        }
        let beta_sq: f64 = r.iter().map(|ri| ri * ri).sum();
        if !(beta_sq > 0.0 && beta_sq.is_finite()) {
            return Err(Error::PrecisionExhausted {
                degree: k + 1,
                detail: format!("B[{}]^2 = {beta_sq:e}", k + 1),
            });
        }
        let beta = beta_sq.sqrt();
        a.push(alpha);
        b.push(beta);
        for i in 0..m {
            let next = r[i] / beta;
            v_prev[i] = v[i];
            v[i] = next;
        }
    }
    Ok(Coefficients { a, b, mu0 })
}

fn max_relative_change(old: &Coefficients, new: &Coefficients) -> f64 {
    let mut change = ((old.mu0 - new.mu0) / new.mu0).abs();
    for (k, (&x, &y)) in old.b.iter().zip(&new.b).enumerate().skip(1) {
        change = change.max(((x - y) / y).abs());
        if k <= new.a.len() {
            change = change.max(((old.a[k - 1] - new.a[k - 1]) / y).abs());
        }
    }
    change
}

/// Build the recurrence table up to degree `n`, doubling the discretization
/// until two successive sizes agree to `disc.stability_tol`.
pub fn recurrence_table(
    spec: &WeightSpec,
    n: usize,
    disc: &DiscretizationConfig,
) -> Result<RecurrenceTable> {
    if n < 1 {
        return Err(Error::Domain("recurrence table needs N >= 1".into()));
    }
    if disc.truncation_multiple < 2.0 {
        return Err(Error::Domain(format!(
            "truncation multiple c = {} must be >= 2",
            disc.truncation_multiple
        )));
    }
    if disc.nodes_per_panel < 2 {
        return Err(Error::Domain("need at least 2 nodes per panel".into()));
    }
    let a_n = mrs_a(spec, n as f64)?;
    let radius = truncation_radius(spec, n, disc.truncation_multiple, disc.tail_q)?;
    let inner = disc.panels.unwrap_or(n / 2 + 16).max(4);
    let outer = (inner / 4).max(16);
    let m = disc.nodes_per_panel;

    let mut level = 1;
    let mut grid = discretize(spec, a_n, radius, inner, outer, m);
    let mut coeffs = lanczos(&grid, n)?;
    let mut change = f64::INFINITY;
    for _ in 0..3 {
        level *= 2;
        let finer = discretize(spec, a_n, radius, inner * level, outer * level, m);
        let finer_coeffs = lanczos(&finer, n)?;
        change = max_relative_change(&coeffs, &finer_coeffs);
        grid = finer;
        coeffs = finer_coeffs;
        if change <= disc.stability_tol {
            break;
        }
    }
    // The grid is mirrored, so the odd moments vanish up to rounding.
    for (a, b) in coeffs.a.iter_mut().zip(&coeffs.b[1..]) {
        if a.abs() <= 1e-10 * b {
            *a = 0.0;
        }
    }
    if change > disc.stability_tol {
        return Err(Error::Unstable {
            change,
            tol: disc.stability_tol,
        });
    }
    Ok(RecurrenceTable {
        weight: spec.descriptor().to_string(),
        n,
        mu0: coeffs.mu0,
        a: coeffs.a,
        b: coeffs.b,
        disc: DiscretizationMeta {
            config: *disc,
            radius,
            inner_panels: grid.inner,
            outer_panels: grid.outer,
            points: grid.x.len(),
            stability_change: change,
        },
    })
}

/// Weighted values `q_k(x) = p_k(x) w(x)` for `k = 0..=n`, given `Q(x)`.
///
/// `q` receives `n + 1` entries. Returns `ln K_{n+1}(x, x) = ln sum_{k<=n} p_k(x)^2`.
pub(crate) fn fill_weighted(table: &RecurrenceTable, n: usize, x: f64, q_x: f64, q: &mut [f64]) -> f64 {
    debug_assert!(n <= table.n && q.len() > n);
    let mut scale = 0.0f64; // p_k = ptilde_k * exp(scale)
    let mut factor = (-q_x).exp();
    let mut prev = 0.0;
    let mut cur = 1.0 / table.b[0];
    let mut sum_sq = cur * cur;
    q[0] = cur * factor;
    for k in 0..n {
        let mut next = ((x - table.a[k]) * cur - table.b[k] * prev) / table.b[k + 1];
        if next.abs() > RESCALE {
            next /= RESCALE;
            cur /= RESCALE;
            sum_sq /= RESCALE * RESCALE;
            scale += RESCALE.ln();
            factor = (scale - q_x).exp();
        }
        sum_sq += next * next;
        q[k + 1] = next * factor;
        prev = cur;
        cur = next;
    }
    sum_sq.ln() + 2.0 * scale
}

/// `q_k(x) = p_k(x) w(x)` for `k = 0..=n`.
pub fn weighted_values(
    table: &RecurrenceTable,
    spec: &WeightSpec,
    n: usize,
    x: f64,
) -> Result<Vec<f64>> {
    table.check_degree(n)?;
    let e = spec.eval(x);
    let mut q = vec![0.0; n + 1];
    if e.overflow {
        return Ok(q);
    }
    fill_weighted(table, n, x, e.q, &mut q);
    Ok(q)
}

/// `p_n(x) w(x)`.
pub fn eval_weighted(table: &RecurrenceTable, spec: &WeightSpec, n: usize, x: f64) -> Result<f64> {
    Ok(weighted_values(table, spec, n, x)?[n])
}

/// Unweighted `p_n(x)`; may overflow to infinity far outside `[-a_n, a_n]`.
pub fn eval_poly(table: &RecurrenceTable, n: usize, x: f64) -> Result<f64> {
    table.check_degree(n)?;
    let mut q = vec![0.0; n + 1];
    fill_weighted(table, n, x, 0.0, &mut q);
    Ok(q[n])
}

/// `ln K_n(x, x) = ln sum_{k<n} p_k(x)^2` for `n >= 1`.
pub fn log_kernel_diag(table: &RecurrenceTable, n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("kernel needs n >= 1".into()));
    }
    table.check_degree(n - 1)?;
    let mut q = vec![0.0; n];
    Ok(fill_weighted(table, n - 1, x, 0.0, &mut q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChristoffelValue {
    /// `lambda_{n,2}(w; x) = 1 / K_n(x, x)`.
    pub value: f64,
    /// `lambda_{n,2}(w; x) / w(x)^2 = 1 / sum_{k<n} q_k(x)^2`.
    pub weighted: f64,
    /// `value` underflowed to zero.
    pub underflow: bool,
}

/// Christoffel function `lambda_{n,2}(w; x)`.
pub fn christoffel(
    table: &RecurrenceTable,
    spec: &WeightSpec,
    n: usize,
    x: f64,
) -> Result<ChristoffelValue> {
    if n == 0 {
        return Err(Error::Domain("christoffel function needs n >= 1".into()));
    }
    table.check_degree(n)?;
    let log_k = log_kernel_diag(table, n, x)?;
    let e = spec.eval(x);
    let value = (-log_k).exp();
    let weighted = (2.0 * e.q - log_k).exp();
    Ok(ChristoffelValue {
        value,
        weighted: if weighted.is_finite() { weighted } else { f64::MAX },
        underflow: value == 0.0,
    })
}

/// Gauss rule for `w^2 dx` built from the zeros of `p_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussRule {
    pub n: usize,
    /// Ascending: `x_{n,n} < ... < x_{1,n}`.
    pub nodes: Vec<f64>,
    /// Christoffel numbers `lambda_{k,n}`, aligned with `nodes`.
    pub weights: Vec<f64>,
    /// `ln K_n(x_k, x_k)` at each node; `weights[i] = exp(-log_kernel_diag[i])`.
    pub log_kernel_diag: Vec<f64>,
}

impl GaussRule {
    /// `x_{k,n}` in the descending labelling, `1 <= k <= n`.
    pub fn x(&self, k: usize) -> f64 {
        self.nodes[self.n - k]
    }

    /// `lambda_{k,n}` in the descending labelling.
    pub fn lambda(&self, k: usize) -> f64 {
        self.weights[self.n - k]
    }

    /// `lambda_{k,n} / w(x_k)^2`, for integrating products of weighted values
    /// without forming `w^2` explicitly.
    pub fn weighted_weights(&self, spec: &WeightSpec) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.log_kernel_diag)
            .map(|(&x, &lk)| (2.0 * spec.q(x) - lk).exp())
            .collect()
    }

    /// `sum_k lambda_k g(x_k)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &l)| l * g(x))
            .sum()
    }
}

/// Zeros and Christoffel numbers of `p_n`.
///
/// Nodes are eigenvalues of the `n x n` Jacobi matrix. The weights equal
/// `mu0` times the squared first eigenvector components; they are evaluated
/// as `1 / K_n(x_k, x_k)` at the computed nodes, which is the same quantity
/// with full relative accuracy in the far tails.
pub fn gauss_rule(table: &RecurrenceTable, n: usize) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::Domain("gauss rule needs n >= 1".into()));
    }
    table.check_degree(n)?;
    let (mut nodes, _) = eigen_first_components(&table.a[..n], &table.b[1..n])?;
    let symmetric = table.a[..n]
        .iter()
        .zip(&table.b[1..=n])
        .all(|(a, b)| a.abs() <= 1e-10 * b);
    if symmetric {
        for i in 0..n / 2 {
            let v = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -v;
            nodes[n - 1 - i] = v;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
    }
    let log_kernel_diag = nodes
        .iter()
        .map(|&x| log_kernel_diag(table, n, x))
        .collect::<Result<Vec<_>>>()?;
    let weights = log_kernel_diag.iter().map(|lk| (-lk).exp()).collect();
    Ok(GaussRule {
        n,
        nodes,
        weights,
        log_kernel_diag,
    })
}
