//! Symmetric tridiagonal eigenproblem by the implicit QL method.
//!
//! Only the eigenvalues and the first component of each normalized
//! eigenvector are accumulated, which is all a Gauss rule needs.

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Eigenvalues (ascending) and first eigenvector components of the symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off.len() == diag.len() - 1`).
pub fn eigen_first_components(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1), "off-diagonal length mismatch");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut z = vec![0.0; n];
    if n == 0 {
        return Ok((d, z));
    }
    z[0] = 1.0;
    if n == 1 {
        return Ok((d, z));
    }
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                if e[m].abs() <= eps * (d[m].abs() + d[m + 1].abs()) {
                    break;
                }
                m += 1;
            }
            let mut p = d[l];
            if m == l {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::EigenNoConvergence { index: l });
            }
            sweeps += 1;
            let mut g = (d[l + 1] - p) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - p + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            p = 0.0;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                if g.abs() <= f.abs() {
                    c = g / f;
                    r = c.hypot(1.0);
                    e[i + 1] = f * r;
                    s = 1.0 / r;
                    c *= s;
                } else {
                    s = f / g;
                    r = s.hypot(1.0);
                    e[i + 1] = g * r;
                    c = 1.0 / r;
                    s *= c;
                }
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    Ok((
        order.iter().map(|&i| d[i]).collect(),
        order.iter().map(|&i| z[i]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let (vals, z) = eigen_first_components(&[0.0, 0.0], &[0.5]).unwrap();
        assert!((vals[0] + 0.5).abs() < 1e-15 && (vals[1] - 0.5).abs() < 1e-15);
        assert!((z[0] * z[0] - 0.5).abs() < 1e-15);
        assert!((z[1] * z[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn legendre_jacobi_matrix_gives_gauss_legendre() {
        // Legendre: b_k = k / sqrt(4k^2 - 1), mu0 = 2.
        let n = 20;
        let off: Vec<f64> = (1..n)
            .map(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt())
            .collect();
        let (vals, z) = eigen_first_components(&vec![0.0; n], &off).unwrap();
        let gl = crate::quad::gauss_legendre(n);
        for i in 0..n {
            assert!((vals[i] - gl.nodes[i]).abs() < 1e-14);
            assert!((2.0 * z[i] * z[i] - gl.weights[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn first_components_are_normalized() {
        let diag = [1.0, -2.0, 0.5, 3.0, 0.0];
        let off = [0.3, 1.2, -0.7, 0.01];
        let (_, z) = eigen_first_components(&diag, &off).unwrap();
        let sum: f64 = z.iter().map(|v| v * v).sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }
}
