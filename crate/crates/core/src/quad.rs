//! Quadrature building blocks: Gauss–Legendre rules of arbitrary order and a
//! globally adaptive Gauss–Kronrod (7/15) integrator for scalar and
//! vector-valued integrands with user supplied breakpoints.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Integrate `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn compute_gauss_legendre(n: usize) -> GaussLegendre {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-type initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussLegendre { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Memoized Gauss–Legendre rule of order `n`.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("gauss-legendre cache poisoned").get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(n));
    cache
        .lock()
        .expect("gauss-legendre cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct VecEstimate {
    pub values: Vec<f64>,
    pub error: f64,
    pub segments: usize,
}

/// Limits for [`integrate_vec`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub abs_tol: f64,
    pub max_segments: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_segments: 200_000,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    values: Vec<f64>,
    err: f64,
}

#[derive(PartialEq)]
struct Keyed(f64, usize);

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

fn kronrod_segment<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    dim: usize,
    buf: &mut [f64],
) -> Segment {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    for (j, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let signs: &[f64] = if j == 7 { &[1.0] } else { &[-1.0, 1.0] };
        for &s in signs {
            f(mid + s * half * x, buf);
            for i in 0..dim {
                kron[i] += wk * buf[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..dim {
        kron[i] *= half;
        gauss[i] *= half;
        err = err.max((kron[i] - gauss[i]).abs());
    }
    if !err.is_finite() {
        err = f64::INFINITY;
    }
    Segment {
        a,
        b,
        values: kron,
        err,
    }
}

/// Globally adaptive Gauss–Kronrod integration of a vector-valued integrand.
///
/// `breaks` must be sorted; the integration range is `[breaks[0], breaks[last]]`
/// and every interior break is kept as a segment boundary, so jumps and kinks
/// placed there are never straddled by a rule. The integrand writes its `dim`
/// components into the supplied buffer.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    breaks: &[f64],
    cfg: AdaptiveConfig,
) -> VecEstimate {
    let mut buf = vec![0.0; dim];
    let mut segments: Vec<Segment> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let seg = kronrod_segment(&mut f, w[0], w[1], dim, &mut buf);
            total_err += seg.err;
            heap.push(Keyed(seg.err, segments.len()));
            segments.push(seg);
        }
    }
    while total_err > cfg.abs_tol && segments.len() < cfg.max_segments {
        let Some(Keyed(err, idx)) = heap.pop() else {
            break;
        };
        let (a, b) = (segments[idx].a, segments[idx].b);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) || (b - a) <= 1e-15 * a.abs().max(b.abs()).max(1e-300) {
            // unsplittable; leave its error in the budget
            continue;
        }
        let left = kronrod_segment(&mut f, a, mid, dim, &mut buf);
        let right = kronrod_segment(&mut f, mid, b, dim, &mut buf);
        total_err += left.err + right.err - err;
        heap.push(Keyed(left.err, idx));
        heap.push(Keyed(right.err, segments.len()));
        segments[idx] = left;
        segments.push(right);
        if !total_err.is_finite() {
            total_err = segments.iter().map(|s| s.err).sum();
        }
    }
    let mut values = vec![0.0; dim];
    for seg in &segments {
        for (v, s) in values.iter_mut().zip(&seg.values) {
            *v += s;
        }
    }
    VecEstimate {
        values,
        error: segments.iter().map(|s| s.err).sum(),
        segments: segments.len(),
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], cfg: AdaptiveConfig) -> Estimate {
    let est = integrate_vec(|x, out| out[0] = f(x), 1, breaks, cfg);
    Estimate {
        value: est.values[0],
        error: est.error,
    }
}

/// Uniform subdivision of [a, b] into pieces no wider than `max_width`.
pub fn subdivide(a: f64, b: f64, max_width: f64) -> Vec<f64> {
    if b <= a {
        return vec![a, b];
    }
    let pieces = (((b - a) / max_width).ceil() as usize).clamp(1, 100_000);
    (0..=pieces)
        .map(|i| {
            if i == pieces {
                b
            } else {
                a + (b - a) * i as f64 / pieces as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64] {
            let rule = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let rule = gauss_legendre(513);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn adaptive_handles_jump_at_break() {
        let est = integrate(
            |x| if x < 0.3 { 0.0 } else { x.exp() },
            &[-1.0, 0.3, 2.0],
            AdaptiveConfig::default(),
        );
        assert_relative_eq!(est.value, 2f64.exp() - 0.3f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn adaptive_gaussian() {
        let est = integrate(
            |x| (-x * x).exp(),
            &subdivide(-10.0, 10.0, 2.0),
            AdaptiveConfig::default(),
        );
        assert_relative_eq!(est.value, std::f64::consts::PI.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn adaptive_vector_components_independent() {
        let est = integrate_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = x.cos();
            },
            2,
            &[0.0, std::f64::consts::PI],
            AdaptiveConfig::default(),
        );
        assert_relative_eq!(est.values[0], 2.0, epsilon = 1e-12);
        assert!(est.values[1].abs() < 1e-12);
    }
}
