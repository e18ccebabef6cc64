//! Generalized Gauss-Laguerre rules for the probability weight
//! `x^alpha e^{-x} / Gamma(alpha + 1)` on `(0, inf)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub alpha: f64,
    pub order: usize,
    /// Strictly increasing positive nodes.
    pub nodes: Vec<f64>,
    /// Positive weights summing to one.
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Recurrence coefficients of the orthonormal Laguerre polynomials:
/// `b_{j+1} p_{j+1} = (x - a_j) p_j - b_j p_{j-1}`.
fn diag(alpha: f64, j: usize) -> f64 {
    2.0 * j as f64 + alpha + 1.0
}

fn offdiag(alpha: f64, j: usize) -> f64 {
    let j = j as f64;
    (j * (j + alpha)).sqrt()
}

/// Gauss rule of the given order via the Jacobi matrix (Golub-Welsch).
///
/// Eigenvalues come from implicit QL on the tridiagonal matrix and are then
/// polished by Newton steps on `p_Q`. Weights use the Christoffel function
/// `1 / sum_j p_j(x)^2`, accumulated with rescaling so that large `alpha`
/// cannot overflow.
pub fn laguerre_rule(alpha: f64, order: usize) -> Result<QuadRule> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::param(format!("laguerre exponent must be finite and >= 0, got {alpha}")));
    }
    if order == 0 {
        return Err(Error::param("quadrature order must be >= 1"));
    }
    let n = order;
    let mut d: Vec<f64> = (0..n).map(|j| diag(alpha, j)).collect();
    let mut e: Vec<f64> = (0..n).map(|j| if j + 1 < n { offdiag(alpha, j + 1) } else { 0.0 }).collect();
    tridiagonal_eigenvalues(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);

    let mut nodes = d.clone();
    for i in 0..n {
        let lo = if i > 0 { d[i - 1] } else { 0.0 };
        let hi = if i + 1 < n { d[i + 1] } else { f64::INFINITY };
        let mut x = d[i];
        for _ in 0..4 {
            let (p, dp) = orthonormal_value(alpha, n, x);
            if dp == 0.0 || !dp.is_finite() {
                break;
            }
            let next = x - p / dp;
            if !(next > lo && next < hi) || !next.is_finite() {
                break;
            }
            let step = (next - x).abs();
            x = next;
            if step <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        nodes[i] = x;
    }

    let mut weights: Vec<f64> = nodes.iter().map(|&x| christoffel(alpha, n, x)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(QuadRule { alpha, order, nodes, weights })
}

/// `(p_n(x), p_n'(x))` up to a common positive factor.
fn orthonormal_value(alpha: f64, n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut dp_prev, mut dp) = (0.0, 0.0);
    for j in 0..n {
        let b_next = offdiag(alpha, j + 1);
        let b = offdiag(alpha, j);
        let p_next = ((x - diag(alpha, j)) * p - b * p_prev) / b_next;
        let dp_next = (p + (x - diag(alpha, j)) * dp - b * dp_prev) / b_next;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        let scale = p.abs().max(dp.abs());
        if scale > 1e150 {
            p /= scale;
            p_prev /= scale;
            dp /= scale;
            dp_prev /= scale;
        }
    }
    (p, dp)
}

/// `1 / sum_{j<n} p_j(x)^2` evaluated with a running log-scale.
fn christoffel(alpha: f64, n: usize, x: f64) -> f64 {
    const BIG: f64 = 1e100;
    let (mut p_prev, mut p) = (0.0f64, 1.0f64);
    let mut sum = 1.0f64;
    let mut log_scale = 0.0f64;
    for j in 0..n.saturating_sub(1) {
        let p_next = ((x - diag(alpha, j)) * p - offdiag(alpha, j) * p_prev) / offdiag(alpha, j + 1);
        p_prev = p;
        p = p_next;
        sum += p * p;
        if p.abs() > BIG {
            p /= BIG;
            p_prev /= BIG;
            sum /= BIG * BIG;
            log_scale += 2.0 * BIG.ln();
        }
    }
    (-(sum.ln() + log_scale)).exp()
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e[i]` coupling `i` and `i + 1` (implicit QL with Wilkinson shifts).
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Resource("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn oracle(alpha: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut j = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            j[(i, i)] = diag(alpha, i);
            if i + 1 < n {
                j[(i, i + 1)] = offdiag(alpha, i + 1);
                j[(i + 1, i)] = offdiag(alpha, i + 1);
            }
        }
        let eig = j.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }

    #[test]
    fn one_and_two_point_rules() {
        let r = laguerre_rule(0.0, 1).unwrap();
        assert_eq!(r.nodes.len(), 1);
        assert!((r.nodes[0] - 1.0).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);

        let r = laguerre_rule(0.0, 2).unwrap();
        let s2 = 2f64.sqrt();
        assert!((r.nodes[0] - (2.0 - s2)).abs() < 1e-14);
        assert!((r.nodes[1] - (2.0 + s2)).abs() < 1e-14);
        assert!((r.weights[0] - (2.0 + s2) / 4.0).abs() < 1e-14);
        assert!((r.weights[1] - (2.0 - s2) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn matches_dense_eigendecomposition() {
        for &alpha in &[0.0, 0.5, 3.0, 49.0, 250.0] {
            for &n in &[3usize, 10, 40, 80] {
                let r = laguerre_rule(alpha, n).unwrap();
                let (x, w) = oracle(alpha, n);
                for i in 0..n {
                    assert!((r.nodes[i] - x[i]).abs() <= 1e-11 * x[i].max(1.0), "alpha {alpha} n {n} node {i}");
                    if w[i] > 1e-8 {
                        assert!((r.weights[i] - w[i]).abs() <= 1e-8 * w[i], "alpha {alpha} n {n} weight {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(laguerre_rule(-0.5, 4).is_err());
        assert!(laguerre_rule(1.0, 0).is_err());
    }

    #[test]
    fn nodes_increase_and_weights_normalize() {
        for &alpha in &[0.0, 1.5, 999.0] {
            let r = laguerre_rule(alpha, 80).unwrap();
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes[0] > 0.0);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    /// `sum w x^p` against `prod_{j=1}^p (alpha + j)`, compared in log space.
    fn moment_error(r: &QuadRule, p: usize) -> f64 {
        let log_exact: f64 = (1..=p).map(|j| (r.alpha + j as f64).ln()).sum();
        let ratio: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(&x, &w)| (w.ln() + p as f64 * x.ln() - log_exact).exp())
            .sum();
        (ratio - 1.0).abs()
    }

    #[test]
    fn integrates_polynomials_exactly() {
        for &(alpha, n) in &[(0.0, 5usize), (0.0, 20), (2.5, 20), (30.0, 40), (0.0, 80), (120.0, 80)] {
            let r = laguerre_rule(alpha, n).unwrap();
            let worst = (0..2 * n).map(|p| moment_error(&r, p)).fold(0.0, f64::max);
            assert!(worst <= 1e-12, "alpha {alpha} order {n}: {worst:e}");
        }
    }
}
