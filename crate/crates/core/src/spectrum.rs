//! Eigenvalue functions `gamma_{n,a}(m) = E[a(sqrt R)]`, `R_j ~ Gamma(m_j + n_j, 1)`,
//! their tables, and the Lipschitz apparatus in the square-root metric.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::index::{MultiIndex, Partition, Window};
use crate::quad::{adaptive_pieces, Estimate, GammaPlan, Mode, DEFAULT_ORDER};
use crate::symbol::QuasiRadialSymbol;

/// Largest table filled by default.
pub const DEFAULT_CELL_CAP: usize = 10_000_000;

/// `2 sqrt(2/pi)`, the Lipschitz constant of `m -> gamma(m)` per unit sup norm.
pub fn lipschitz_constant() -> f64 {
    2.0 * (2.0 / PI).sqrt()
}

fn check_arity(a: &QuasiRadialSymbol, n: &Partition, m: &MultiIndex) -> Result<()> {
    if a.arity() != n.k() {
        return Err(Error::arity(n.k(), a.arity()));
    }
    if m.len() != n.k() {
        return Err(Error::arity(n.k(), m.len()));
    }
    Ok(())
}

/// `gamma_{n,a}(m)` with its quadrature error estimate.
pub fn eigenvalue_with(
    a: &QuasiRadialSymbol,
    n: &Partition,
    m: &MultiIndex,
    order: usize,
    mode: Mode,
) -> Result<Estimate> {
    check_arity(a, n, m)?;
    GammaPlan::new(a, order, mode)?.expect(&n.shapes(m)?)
}

/// `gamma_{n,a}(m)` at the default order in automatic mode.
pub fn eigenvalue(a: &QuasiRadialSymbol, n: &Partition, m: &MultiIndex) -> Result<Complex64> {
    Ok(eigenvalue_with(a, n, m, DEFAULT_ORDER, Mode::Auto)?.value)
}

/// `gamma_{n,a}` on a window, row-major, with per-entry error estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenTable {
    pub partition: Partition,
    /// The symbol document the table was computed from.
    pub symbol: String,
    pub window: Window,
    pub values: Vec<Complex64>,
    pub errors: Vec<f64>,
}

impl EigenTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, m: &MultiIndex) -> Option<Estimate> {
        self.window.contains(m).then(|| {
            let i = self.window.linear_index(&m.0);
            Estimate { value: self.values[i], error: self.errors[i] }
        })
    }

    /// CSV with header `m_1,...,m_k,gamma_re,gamma_im,err`.
    pub fn to_csv(&self) -> String {
        let k = self.window.k();
        let mut out = String::with_capacity(self.len() * 48);
        for d in 1..=k {
            let _ = write!(out, "m_{d},");
        }
        out.push_str("gamma_re,gamma_im,err\n");
        for (i, (v, e)) in self.values.iter().zip(&self.errors).enumerate() {
            for mi in self.window.point(i).0 {
                let _ = write!(out, "{mi},");
            }
            let _ = writeln!(out, "{},{},{}", v.re, v.im, e);
        }
        out
    }
}

pub fn eigen_table(a: &QuasiRadialSymbol, n: &Partition, window: &Window) -> Result<EigenTable> {
    eigen_table_with(a, n, window, DEFAULT_ORDER, Mode::Auto, DEFAULT_CELL_CAP)
}

/// Fill a table; each distinct shape is integrated once per coordinate.
pub fn eigen_table_with(
    a: &QuasiRadialSymbol,
    n: &Partition,
    window: &Window,
    order: usize,
    mode: Mode,
    cell_cap: usize,
) -> Result<EigenTable> {
    if window.k() != n.k() {
        return Err(Error::arity(n.k(), window.k()));
    }
    if a.arity() != n.k() {
        return Err(Error::arity(n.k(), a.arity()));
    }
    let cells = window.len();
    if cells > cell_cap {
        return Err(Error::Resource(format!("window has {cells} cells, cap is {cell_cap}")));
    }
    let axes: Vec<Vec<f64>> = window
        .bounds()
        .iter()
        .zip(n.parts())
        .map(|(&b, &nj)| (0..=b).map(|m| (m + nj) as f64).collect())
        .collect();
    let ests = GammaPlan::new(a, order, mode)?.table(&axes)?;
    Ok(EigenTable {
        partition: n.clone(),
        symbol: a.to_json(),
        window: window.clone(),
        values: ests.iter().map(|e| e.value).collect(),
        errors: ests.iter().map(|e| e.error).collect(),
    })
}

/// `ln(r^m e^{-r} / m!)`.
fn log_kernel(m: u64, r: f64) -> f64 {
    if m == 0 {
        -r
    } else {
        m as f64 * r.ln() - r - ln_gamma(m as f64 + 1.0)
    }
}

/// `int |K(m, r) - K(m-1, r)| dr = 2 m^m e^{-m} / m!` for `m >= 1`, in log space.
pub fn adjacent_kernel_distance(m: u64) -> f64 {
    assert!(m >= 1, "adjacent distance needs m >= 1");
    let mf = m as f64;
    (LN_2 + mf * mf.ln() - mf - ln_gamma(mf + 1.0)).exp()
}

/// Telescoping upper bound `sum_{j=lo+1}^{hi}` of adjacent distances.
pub fn kernel_l1_telescoping_bound(m: u64, mp: u64) -> f64 {
    let (lo, hi) = (m.min(mp), m.max(mp));
    (lo + 1..=hi).map(adjacent_kernel_distance).sum()
}

/// Break points for integrating Gamma kernels with shapes up to `hi_m`.
fn kernel_points(lo_m: u64, hi_m: u64, extra: &[f64]) -> Vec<f64> {
    let (lo_m, hi_m) = (lo_m as f64, hi_m as f64);
    let start = (lo_m - 12.0 * lo_m.sqrt() - 30.0).max(0.0);
    let end = hi_m + 12.0 * hi_m.sqrt() + 40.0;
    let step = (hi_m.sqrt() / 2.0).max(1.0);
    let mut pts: Vec<f64> = std::iter::successors(Some(start), |&x| (x + step < end).then_some(x + step)).collect();
    pts.push(end);
    pts.extend(extra.iter().copied().filter(|&x| x > start && x < end));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `int_0^inf |r^m/m! - r^{m'}/m'!| e^{-r} dr` by adaptive quadrature split at
/// the unique crossing point. Returns `(value, error estimate)`.
pub fn kernel_l1_quadrature(m: u64, mp: u64) -> (f64, f64) {
    if m == mp {
        return (0.0, 0.0);
    }
    let (lo, hi) = (m.min(mp), m.max(mp));
    let cross = ((ln_gamma(hi as f64 + 1.0) - ln_gamma(lo as f64 + 1.0)) / (hi - lo) as f64).exp();
    let (lg_lo, lg_hi) = (ln_gamma(lo as f64 + 1.0), ln_gamma(hi as f64 + 1.0));
    let (lo_f, hi_f) = (lo as f64, hi as f64);
    let f = |r: f64| {
        if r <= 0.0 {
            return if lo == 0 { 1.0 } else { 0.0 };
        }
        let lr = r.ln();
        ((lo_f * lr - r - lg_lo).exp() - (hi_f * lr - r - lg_hi).exp()).abs()
    };
    let ends = kernel_points(lo, hi, &[]);
    let points = [ends[0], cross, ends[ends.len() - 1]];
    adaptive_pieces(&f, &points, 1e-12)
}

/// The exact kernel distance: closed form for neighbours, quadrature otherwise.
pub fn kernel_l1_distance(m: u64, mp: u64) -> f64 {
    match m.abs_diff(mp) {
        0 => 0.0,
        1 => adjacent_kernel_distance(m.max(mp)),
        _ => kernel_l1_quadrature(m, mp).0,
    }
}

/// `int int |K(m_1,r_1)K(m_2,r_2) - K(m'_1,r_1)K(m'_2,r_2)| dr_1 dr_2` by nested
/// adaptive quadrature. The inner integral is split where the integrand changes sign.
pub fn product_kernel_l1(m: [u64; 2], mp: [u64; 2]) -> f64 {
    let inner = |r1: f64| -> f64 {
        let la = log_kernel(m[0], r1);
        let lc = log_kernel(mp[0], r1);
        if m[1] == mp[1] {
            return (la.exp() - lc.exp()).abs();
        }
        let (m2, m2p) = (m[1] as f64, mp[1] as f64);
        let log_cross =
            (lc - la + ln_gamma(m2 + 1.0) - ln_gamma(m2p + 1.0)) / (m2 - m2p);
        let g = |r2: f64| {
            if r2 <= 0.0 {
                let a = if m[1] == 0 { la.exp() } else { 0.0 };
                let c = if mp[1] == 0 { lc.exp() } else { 0.0 };
                return (a - c).abs();
            }
            ((la + log_kernel(m[1], r2)).exp() - (lc + log_kernel(mp[1], r2)).exp()).abs()
        };
        let cross = if log_cross.is_finite() { log_cross.exp() } else { -1.0 };
        adaptive_pieces(&g, &kernel_points(m[1].min(mp[1]), m[1].max(mp[1]), &[cross]), 1e-12).0
    };
    let (lo, hi) = (m[0].min(mp[0]), m[0].max(mp[0]));
    let mut extra = Vec::new();
    if lo != hi {
        extra.push(((ln_gamma(hi as f64 + 1.0) - ln_gamma(lo as f64 + 1.0)) / (hi - lo) as f64).exp());
    }
    adaptive_pieces(&inner, &kernel_points(lo, hi, &extra), 1e-10).0
}

/// Largest `|gamma(m) - gamma(m')| / rho(m, m')` over all window pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    pub max_ratio: f64,
    pub witness: (MultiIndex, MultiIndex),
    /// `2 sqrt(2/pi) ||a||_inf` for the table's symbol.
    pub bound: f64,
}

pub fn lipschitz_certificate(table: &EigenTable, sup: f64) -> Result<LipschitzCertificate> {
    let n = table.len();
    if n < 2 {
        return Err(Error::param("lipschitz certificate needs at least two table entries"));
    }
    let k = table.window.k();
    // coordinates padded to two axes; extra axes fold into the first
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let r = table.window.point(i).sqrt();
            if k == 2 {
                [r[0], r[1]]
            } else if k == 1 {
                [r[0], 0.0]
            } else {
                [r[0], r[1..].iter().sum()]
            }
        })
        .collect();
    let full: Vec<Vec<f64>> = if k > 2 { (0..n).map(|i| table.window.point(i).sqrt()).collect() } else { Vec::new() };
    let vals = &table.values;
    // squared ratio; the square root is taken once at the end
    let ratio = |i: usize, j: usize| -> f64 {
        let d = if k > 2 {
            full[i].iter().zip(&full[j]).map(|(a, b)| (a - b).abs()).sum()
        } else {
            (pts[i][0] - pts[j][0]).abs() + (pts[i][1] - pts[j][1]).abs()
        };
        (vals[i] - vals[j]).norm_sqr() / (d * d)
    };
    // lower bound from lattice neighbours; a pair can only beat it when its
    // distance is below diam / sqrt(lb), which prunes whole rows at k = 2
    let bounds = table.window.bounds().to_vec();
    let lb = (0..n)
        .flat_map(|i| {
            let m = table.window.point(i).0;
            let bounds = &bounds;
            (0..k).filter_map(move |a| {
                let mut q = m.clone();
                q[a] += 1;
                (q[a] <= bounds[a]).then(|| table.window.linear_index(&q))
            })
            .map(move |j| (i, j))
        })
        .map(|(i, j)| ratio(i, j))
        .fold(0.0f64, f64::max);
    let diam_sq = 4.0 * vals.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let reach = if lb > 0.0 { (diam_sq / lb).sqrt() } else { f64::INFINITY };
    let row_len = if k == 2 { bounds[1] + 1 } else { n };
    let best = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let mut top = 0.0f64;
            let mut arg = i + 1;
            let row0 = i / row_len;
            let mut j = i + 1;
            while j < n {
                let row_end = ((j / row_len) + 1) * row_len;
                if k == 2 && j / row_len != row0 && (pts[j][0] - pts[i][0]).abs() > reach {
                    // rows only move further away
                    break;
                }
                for jj in j..row_end.min(n) {
                    let r = ratio(i, jj);
                    if r > top {
                        top = r;
                        arg = jj;
                    }
                }
                j = row_end;
            }
            (top, i, arg)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(LipschitzCertificate {
        max_ratio: best.0.sqrt(),
        witness: (table.window.point(best.1), table.window.point(best.2)),
        bound: lipschitz_constant() * sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::parse_symbol;

    fn p(parts: &[usize]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    /// Regularized lower incomplete gamma for integer shape via the tail series
    /// `P(n, x) = e^{-x} sum_{j >= n} x^j / j!`.
    fn p_int(n: u64, x: f64) -> f64 {
        let mut term = (-x).exp();
        for j in 1..=n {
            term *= x / j as f64;
        }
        let (mut sum, mut j) = (0.0, n);
        while term > 1e-300 || j < n + 5 {
            sum += term;
            j += 1;
            term *= x / j as f64;
            if j > n + 400 {
                break;
            }
        }
        sum
    }

    #[test]
    fn constant_symbol_gives_one() {
        let a = QuasiRadialSymbol::constant(1.0, 2);
        let v = eigenvalue(&a, &p(&[2, 1]), &MultiIndex(vec![3, 9])).unwrap();
        assert_eq!(v, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn capped_square_moment() {
        let a = parse_symbol(r#"{"kind":"power","coord":0,"exponent":2,"cap":1e6}"#).unwrap();
        let v = eigenvalue(&a, &p(&[1]), &MultiIndex(vec![3])).unwrap();
        assert!((v.re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn box_product_matches_incomplete_gamma() {
        let a = parse_symbol(r#"{"kind":"box","lower":[0,0],"upper":[1,1]}"#).unwrap();
        let v = eigenvalue(&a, &p(&[2, 1]), &MultiIndex(vec![0, 0])).unwrap();
        let e1 = (-1.0f64).exp();
        let exact = (1.0 - 2.0 * e1) * (1.0 - e1);
        assert!((v.re - exact).abs() < 1e-12);
        assert!((v.re - 0.1670).abs() < 1e-4);
        assert!((p_int(2, 1.0) * p_int(1, 1.0) - exact).abs() < 1e-15);
    }

    #[test]
    fn table_matches_pointwise_and_oracle() {
        let a = parse_symbol(r#"{"kind":"box","lower":[0],"upper":[1]}"#).unwrap();
        let n = p(&[3]);
        let t = eigen_table(&a, &n, &Window::new(vec![40]).unwrap()).unwrap();
        assert!((t.values[0].re - (1.0 - 2.5 * (-1.0f64).exp())).abs() < 1e-12);
        assert!((t.values[0].re - 0.0803014).abs() < 1e-7);
        for m in 0..=40usize {
            let pt = eigenvalue_with(&a, &n, &MultiIndex(vec![m]), DEFAULT_ORDER, Mode::Auto).unwrap();
            assert_eq!(t.values[m], pt.value);
            assert_eq!(t.errors[m], pt.error);
            assert!((pt.value.re - p_int(m as u64 + 3, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn ones_table_and_csv() {
        let a = QuasiRadialSymbol::constant(1.0, 2);
        let t = eigen_table(&a, &p(&[2, 1]), &Window::new(vec![5, 5]).unwrap()).unwrap();
        assert!(t.values.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let csv = t.to_csv();
        assert!(csv.starts_with("m_1,m_2,gamma_re,gamma_im,err\n0,0,1,0,0\n"));
        assert_eq!(csv.lines().count(), 37);
    }

    #[test]
    fn cell_cap_is_enforced() {
        let a = QuasiRadialSymbol::constant(1.0, 2);
        let r = eigen_table_with(&a, &p(&[1, 1]), &Window::new(vec![99, 99]).unwrap(), 80, Mode::Auto, 1000);
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn adjacent_closed_form() {
        assert!((adjacent_kernel_distance(1) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((kernel_l1_distance(1, 0) - 0.7357589).abs() < 1e-7);
        for m in [1u64, 2, 5, 17, 100, 1000, 9999] {
            let (q, e) = kernel_l1_quadrature(m, m - 1);
            let c = adjacent_kernel_distance(m);
            assert!((q - c).abs() < 1e-10, "m = {m}: {q} vs {c} (err {e})");
        }
    }

    #[test]
    fn general_distance_below_bounds() {
        for (m, mp) in [(0u64, 5u64), (3, 40), (100, 160), (2500, 2400)] {
            let d = kernel_l1_distance(m, mp);
            assert!(d <= kernel_l1_telescoping_bound(m, mp) + 1e-12);
            let paper = lipschitz_constant() * ((m as f64).sqrt() - (mp as f64).sqrt()).abs();
            assert!(d <= paper + 1e-12);
            assert!((d - kernel_l1_distance(mp, m)).abs() < 1e-15);
        }
    }

    #[test]
    fn product_l1_below_sum() {
        let v = product_kernel_l1([3, 7], [5, 6]);
        let s = kernel_l1_distance(3, 5) + kernel_l1_distance(7, 6);
        assert!(v <= s + 1e-9, "{v} vs {s}");
        assert!(v > 0.5 * s);
        // one coordinate equal: the product distance is the 1-D distance
        let w = product_kernel_l1([4, 9], [4, 12]);
        assert!((w - kernel_l1_distance(9, 12)).abs() < 1e-9);
    }

    #[test]
    fn lipschitz_of_constant_is_zero() {
        let a = QuasiRadialSymbol::constant(1.0, 1);
        let t = eigen_table(&a, &p(&[1]), &Window::new(vec![10]).unwrap()).unwrap();
        let c = lipschitz_certificate(&t, 1.0).unwrap();
        assert_eq!(c.max_ratio, 0.0);
        assert!((lipschitz_constant() - 1.5957691).abs() < 1e-7);
    }

    #[test]
    fn lipschitz_of_unit_box() {
        let a = parse_symbol(r#"{"kind":"box","lower":[0],"upper":[1]}"#).unwrap();
        let t = eigen_table(&a, &p(&[1]), &Window::new(vec![200]).unwrap()).unwrap();
        let c = lipschitz_certificate(&t, a.declared_sup()).unwrap();
        assert!(c.max_ratio <= 1.5957692, "{c:?}");
        // attained at (1, 2): (P(2,1) - P(3,1)) / (sqrt 2 - 1) = (e^{-1}/2) / (sqrt 2 - 1)
        let expected = 0.5 * (-1.0f64).exp() / (2f64.sqrt() - 1.0);
        assert!((c.max_ratio - expected).abs() < 1e-12, "{c:?}");
        assert_eq!(c.witness, (MultiIndex(vec![1]), MultiIndex(vec![2])));
    }
}
