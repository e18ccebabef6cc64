//! The square-root metric `rho_k(m, m') = sum_i |sqrt m_i - sqrt m'_i|`, moduli of
//! continuity on finite windows, and the left/right shift operators.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{MultiIndex, Window};
use crate::lattice::{LatticeFunction, LatticeRule};

pub fn rho(m: &MultiIndex, mp: &MultiIndex) -> Result<f64> {
    if m.len() != mp.len() {
        return Err(Error::arity(m.len(), mp.len()));
    }
    Ok(rho_slice(&m.0, &mp.0))
}

pub(crate) fn rho_slice(m: &[usize], mp: &[usize]) -> f64 {
    m.iter().zip(mp).map(|(&a, &b)| ((a as f64).sqrt() - (b as f64).sqrt()).abs()).sum()
}

/// Extension of `rho` to `R_+^k`.
pub fn rho_real(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a.sqrt() - b.sqrt()).abs()).sum()
}

/// `sup |sigma(m) - sigma(m')|` over window pairs with `rho <= delta`.
///
/// This is the modulus of continuity restricted to the window, hence a lower
/// bound for the modulus on all of `N_0^k`.
pub fn modulus(sigma: &LatticeFunction, delta: f64, window: &Window) -> Result<f64> {
    Ok(modulus_profile(sigma, &[delta], window)?[0])
}

/// [`modulus`] for several `delta` values from a single pair scan.
pub fn modulus_profile(sigma: &LatticeFunction, deltas: &[f64], window: &Window) -> Result<Vec<f64>> {
    if sigma.arity() != window.k() {
        return Err(Error::arity(sigma.arity(), window.k()));
    }
    let values: Vec<Complex64> = (0..window.len())
        .into_par_iter()
        .map(|i| sigma.at(&window.point(i).0))
        .collect();
    modulus_profile_values(&values, window, deltas)
}

/// Modulus profile of row-major `values` sampled on `window`.
pub fn modulus_profile_values(values: &[Complex64], window: &Window, deltas: &[f64]) -> Result<Vec<f64>> {
    if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::param(format!("delta must be positive, got {d}")));
    }
    if values.len() != window.len() {
        return Err(Error::param("value count does not match the window"));
    }
    if deltas.is_empty() {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| deltas[i]).collect();
    let dmax = sorted[sorted.len() - 1];
    let k = window.k();
    let bounds = window.bounds();

    let buckets = (0..values.len())
        .into_par_iter()
        .fold(
            || vec![0.0f64; sorted.len()],
            |mut best, i| {
                let m = window.point(i).0;
                // per-axis ranges of m' within sqrt-distance dmax
                let ranges: Vec<(usize, usize)> = m
                    .iter()
                    .zip(bounds)
                    .map(|(&mi, &b)| sqrt_ball(mi, dmax, b))
                    .collect();
                let mut mp: Vec<usize> = ranges.iter().map(|r| r.0).collect();
                loop {
                    let j = window.linear_index(&mp);
                    if j > i {
                        let d = rho_slice(&m, &mp);
                        if d <= dmax {
                            let b = sorted.partition_point(|&x| x < d);
                            let diff = (values[i] - values[j]).norm();
                            if diff > best[b] {
                                best[b] = diff;
                            }
                        }
                    }
                    // odometer over the box of ranges
                    let mut axis = k;
                    loop {
                        if axis == 0 {
                            return best;
                        }
                        axis -= 1;
                        if mp[axis] < ranges[axis].1 {
                            mp[axis] += 1;
                            break;
                        }
                        mp[axis] = ranges[axis].0;
                    }
                }
            },
        )
        .reduce(
            || vec![0.0f64; sorted.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        );
    let mut running = 0.0f64;
    let mut out = vec![0.0; deltas.len()];
    for (pos, &orig) in order.iter().enumerate() {
        running = running.max(buckets[pos]);
        out[orig] = running;
    }
    Ok(out)
}

/// Exact window modulus as a step function of `delta`, built from every window pair.
#[derive(Debug, Clone)]
pub struct ModulusTable {
    distances: Vec<f64>,
    prefix_max: Vec<f64>,
}

/// Pair count above which [`ModulusTable::new`] refuses to build.
pub const MODULUS_TABLE_PAIR_CAP: usize = 50_000_000;

impl ModulusTable {
    pub fn new(values: &[Complex64], window: &Window) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::param("value count does not match the window"));
        }
        let n = values.len();
        if n.saturating_mul(n.saturating_sub(1)) / 2 > MODULUS_TABLE_PAIR_CAP {
            return Err(Error::Resource(format!("{n} window points is too many for an exact modulus table")));
        }
        let points: Vec<Vec<usize>> = (0..n).map(|i| window.point(i).0).collect();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let points = &points;
                (i + 1..n).map(move |j| (rho_slice(&points[i], &points[j]), (values[i] - values[j]).norm()))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut running = 0.0f64;
        let (distances, prefix_max) = pairs
            .into_iter()
            .map(|(d, v)| {
                running = running.max(v);
                (d, running)
            })
            .unzip();
        Ok(Self { distances, prefix_max })
    }

    pub fn from_lattice(sigma: &LatticeFunction, window: &Window) -> Result<Self> {
        if sigma.arity() != window.k() {
            return Err(Error::arity(sigma.arity(), window.k()));
        }
        let values: Vec<Complex64> = window.points().map(|m| sigma.at(&m.0)).collect();
        Self::new(&values, window)
    }

    /// `sup |sigma(m) - sigma(m')|` over window pairs with `rho <= delta`; 0 below every pair distance.
    pub fn eval(&self, delta: f64) -> f64 {
        let idx = self.distances.partition_point(|&d| d <= delta);
        if idx == 0 {
            0.0
        } else {
            self.prefix_max[idx - 1]
        }
    }
}

/// Integers `x` in `[0, bound]` with `|sqrt x - sqrt m| <= delta`, as an inclusive range.
fn sqrt_ball(m: usize, delta: f64, bound: usize) -> (usize, usize) {
    let r = (m as f64).sqrt();
    let lo_root = (r - delta).max(0.0);
    let mut lo = (lo_root * lo_root).floor() as usize;
    while lo > 0 && r - ((lo - 1) as f64).sqrt() <= delta {
        lo -= 1;
    }
    while lo < m && r - (lo as f64).sqrt() > delta {
        lo += 1;
    }
    let hi_root = r + delta;
    let mut hi = ((hi_root * hi_root).ceil() as usize).min(bound).max(m.min(bound));
    while hi > m && (hi as f64).sqrt() - r > delta {
        hi -= 1;
    }
    while hi < bound && ((hi + 1) as f64).sqrt() - r <= delta {
        hi += 1;
    }
    (lo.min(bound), hi)
}

/// `(tau_L^s sigma)(m) = sigma(m + s)`.
pub fn shift_left(sigma: &LatticeFunction, s: &MultiIndex) -> Result<LatticeFunction> {
    shift(sigma, s, true)
}

/// `(tau_R^s sigma)(m) = sigma(m - s)` when `m >= s` componentwise, else 0.
pub fn shift_right(sigma: &LatticeFunction, s: &MultiIndex) -> Result<LatticeFunction> {
    shift(sigma, s, false)
}

fn shift(sigma: &LatticeFunction, s: &MultiIndex, left: bool) -> Result<LatticeFunction> {
    if s.len() != sigma.arity() {
        return Err(Error::arity(sigma.arity(), s.len()));
    }
    let inner = Box::new(sigma.rule().clone());
    let rule = if left {
        LatticeRule::ShiftLeft { shift: s.0.clone(), inner }
    } else {
        LatticeRule::ShiftRight { shift: s.0.clone(), inner }
    };
    LatticeFunction::with_arity(rule, sigma.arity())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::parse_lattice;
    use crate::symbol::Expr;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(&mi(&[0, 0]), &mi(&[1, 4])).unwrap(), 3.0);
        assert_eq!(rho(&mi(&[7, 3]), &mi(&[7, 3])).unwrap(), 0.0);
        assert_eq!(rho(&mi(&[4]), &mi(&[9])).unwrap(), 1.0);
        assert!(rho(&mi(&[4]), &mi(&[9, 1])).is_err());
    }

    #[test]
    fn sqrt_ball_is_exact() {
        for m in 0..=250usize {
            for &d in &[0.05, 0.3, 1.0, 2.0] {
                let (lo, hi) = sqrt_ball(m, d, 250);
                for x in 0..=250usize {
                    let inside = ((x as f64).sqrt() - (m as f64).sqrt()).abs() <= d;
                    assert_eq!(inside, x >= lo && x <= hi, "m {m} d {d} x {x}");
                }
            }
        }
    }

    #[test]
    fn constant_has_zero_modulus() {
        let c = LatticeFunction::constant(2.0, 2);
        let w = Window::new(vec![20, 20]).unwrap();
        assert_eq!(modulus_profile(&c, &[0.1, 1.0, 3.0], &w).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn indicator_at_zero() {
        let s = parse_lattice(r#"{"kind":"indicator","points":[[0]]}"#).unwrap();
        let w = Window::new(vec![1]).unwrap();
        assert_eq!(modulus(&s, 1.0, &w).unwrap(), 1.0);
        assert_eq!(modulus(&s, 0.99, &w).unwrap(), 0.0);
    }

    #[test]
    fn sine_of_root_is_one_lipschitz() {
        let s = LatticeFunction::sqrt_expr(Expr::Sin { coord: 0, freq: 1.0 }, 1).unwrap();
        let w = Window::new(vec![10_000]).unwrap();
        let v = modulus(&s, 0.5, &w).unwrap();
        assert!(v <= 0.5 && v > 0.4, "{v}");
    }

    #[test]
    fn profile_matches_brute_force() {
        let s = parse_lattice(
            r#"{"kind":"sqrt_expr","expr":{"kind":"sum","terms":[
                {"weight":1,"expr":{"kind":"sin","coord":0,"freq":2.3}},
                {"weight":0.5,"expr":{"kind":"box","lower":[0,1.5],"upper":[3,2.5]}}]}}"#,
        )
        .unwrap();
        let w = Window::new(vec![30, 12]).unwrap();
        let deltas = [0.1, 0.25, 0.7, 1.3];
        let prof = modulus_profile(&s, &deltas, &w).unwrap();
        for (&d, &p) in deltas.iter().zip(&prof) {
            let mut best = 0.0f64;
            for a in w.points() {
                for b in w.points() {
                    if rho(&a, &b).unwrap() <= d {
                        best = best.max((s.eval(&a).unwrap() - s.eval(&b).unwrap()).norm());
                    }
                }
            }
            assert_eq!(p, best, "delta {d}");
        }
    }

    #[test]
    fn table_matches_profile() {
        let s = LatticeFunction::sqrt_expr(Expr::Sin { coord: 1, freq: 1.7 }, 2).unwrap();
        let w = Window::new(vec![9, 14]).unwrap();
        let t = ModulusTable::from_lattice(&s, &w).unwrap();
        let deltas = [0.05, 0.2, 0.5, 1.0, 2.5];
        let prof = modulus_profile(&s, &deltas, &w).unwrap();
        for (&d, &p) in deltas.iter().zip(&prof) {
            assert_eq!(t.eval(d), p);
        }
        assert_eq!(t.eval(0.0), 0.0);
    }

    #[test]
    fn shifts() {
        let s = parse_lattice(r#"{"kind":"table","shape":[8],"values":[0,1,2,3,4,5,6,7],"tail":-1}"#).unwrap();
        let l = shift_left(&s, &mi(&[2])).unwrap();
        assert_eq!(l.eval(&mi(&[3])).unwrap(), s.eval(&mi(&[5])).unwrap());
        let r = shift_right(&s, &mi(&[1])).unwrap();
        assert_eq!(r.eval(&mi(&[0])).unwrap().re, 0.0);
        let lr = shift_left(&r, &mi(&[1])).unwrap();
        for m in 1..20 {
            assert_eq!(lr.eval(&mi(&[m])).unwrap(), s.eval(&mi(&[m])).unwrap());
        }
    }
}
