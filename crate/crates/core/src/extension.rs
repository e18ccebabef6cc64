//! Extension of a lattice function `sigma` on `N_0^k` to `f` on `R_+^k`, multilinear in the
//! square-root weights `t_i = (sqrt x_i - sqrt m_i) / (sqrt(m_i + 1) - sqrt m_i)` on each cell.
//!
//! Subsets of coordinates are bitmasks: bit `i` stands for coordinate `i` (0-based).

use std::collections::VecDeque;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::factorial;

use crate::error::{Error, Result};
use crate::index::{MultiIndex, Window};
use crate::lattice::LatticeFunction;
use crate::metric::{rho_real, ModulusTable};

pub const MAX_ARITY: usize = 10;

/// `A_k = k! sum_{l=1}^k 2^{l-1} / ((l-1)! (k-l)!)`.
pub fn continuity_constant(k: usize) -> f64 {
    (1..=k)
        .map(|l| factorial(k as u64) * 2f64.powi(l as i32 - 1) / (factorial(l as u64 - 1) * factorial((k - l) as u64)))
        .sum()
}

/// `2 A_k max{2 sup sqrt(delta), omega(sqrt delta)} + omega(delta)`.
pub fn continuity_bound(k: usize, sup: f64, omega: impl Fn(f64) -> f64, delta: f64) -> f64 {
    let r = delta.sqrt();
    2.0 * continuity_constant(k) * (2.0 * sup * r).max(omega(r)) + omega(delta)
}

fn check_arity(sigma: &LatticeFunction, len: usize) -> Result<usize> {
    let k = sigma.arity();
    if len != k {
        return Err(Error::arity(k, len));
    }
    if k > MAX_ARITY {
        return Err(Error::Resource(format!("extension supports arity up to {MAX_ARITY}, got {k}")));
    }
    Ok(k)
}

fn subset_mask(subset: &[usize], k: usize) -> Result<usize> {
    if subset.is_empty() {
        return Err(Error::param("coordinate subset must be nonempty"));
    }
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(format!("coordinate subset {subset:?} is not strictly increasing")));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= k) {
        return Err(Error::param(format!("coordinate {bad} out of range for arity {k}")));
    }
    Ok(subset.iter().fold(0, |acc, &i| acc | (1 << i)))
}

fn corner(m: &[usize], mask: usize) -> Vec<usize> {
    m.iter().enumerate().map(|(i, &mi)| mi + ((mask >> i) & 1)).collect()
}

/// `a_S(m) = sum_{T subset of S} (-1)^{|S|-|T|} sigma(m + e_T)`, summed directly over subsets.
pub fn coeff(sigma: &LatticeFunction, m: &MultiIndex, subset: &[usize]) -> Result<Complex64> {
    let k = check_arity(sigma, m.len())?;
    let s = subset_mask(subset, k)?;
    let size = s.count_ones();
    let mut total = Complex64::new(0.0, 0.0);
    // enumerate submasks of s in increasing order
    let mut t = 0usize;
    loop {
        let v = sigma.at(&corner(&m.0, t));
        if (size - t.count_ones()) % 2 == 0 {
            total += v;
        } else {
            total -= v;
        }
        if t == s {
            break;
        }
        t = (t.wrapping_sub(s)) & s;
    }
    Ok(total)
}

/// Same coefficient through `a_{S + s}(m) = a_S(m + e_s) - a_S(m)`, peeling the largest coordinate.
pub fn coeff_recurrence(sigma: &LatticeFunction, m: &MultiIndex, subset: &[usize]) -> Result<Complex64> {
    let k = check_arity(sigma, m.len())?;
    subset_mask(subset, k)?;
    Ok(recurse(sigma, &m.0, subset))
}

fn recurse(sigma: &LatticeFunction, m: &[usize], subset: &[usize]) -> Complex64 {
    let (&last, rest) = subset.split_last().expect("nonempty subset");
    let mut up = m.to_vec();
    up[last] += 1;
    if rest.is_empty() {
        return sigma.at(&up) - sigma.at(m);
    }
    recurse(sigma, &up, rest) - recurse(sigma, m, rest)
}

/// `(sqrt x - sqrt m) / (sqrt(m + 1) - sqrt m)` in cancellation-free form.
pub fn sqrt_weight(m: usize, x: f64) -> f64 {
    let mf = m as f64;
    let num = if x == mf { 0.0 } else { (x - mf) / (x.sqrt() + mf.sqrt()) };
    num * ((mf + 1.0).sqrt() + mf.sqrt())
}

fn check_point(x: &[f64]) -> Result<()> {
    if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("coordinate {bad} is not a finite nonnegative number")));
    }
    Ok(())
}

fn check_cell(m: &[usize], x: &[f64]) -> Result<()> {
    check_point(x)?;
    for (&mi, &xi) in m.iter().zip(x) {
        if xi < mi as f64 || xi > (mi + 1) as f64 {
            return Err(Error::Domain(format!("{xi} is outside the cell [{mi}, {}]", mi + 1)));
        }
    }
    Ok(())
}

/// Base cell `m` with the coefficient cache `a_S(m)` for every subset `S` (index 0 holds `sigma(m)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CellEvaluation {
    base: MultiIndex,
    coeffs: Vec<Complex64>,
}

impl CellEvaluation {
    pub fn new(sigma: &LatticeFunction, m: &MultiIndex) -> Result<Self> {
        let k = check_arity(sigma, m.len())?;
        let mut coeffs: Vec<Complex64> = (0..1usize << k).map(|mask| sigma.at(&corner(&m.0, mask))).collect();
        // the recurrence applied once per coordinate
        for i in 0..k {
            let bit = 1 << i;
            for mask in 0..coeffs.len() {
                if mask & bit != 0 {
                    coeffs[mask] = coeffs[mask] - coeffs[mask ^ bit];
                }
            }
        }
        Ok(Self { base: m.clone(), coeffs })
    }

    pub fn base(&self) -> &MultiIndex {
        &self.base
    }

    /// `a_S(m)` for the subset encoded by `mask`.
    pub fn coefficient(&self, mask: usize) -> Complex64 {
        self.coeffs[mask]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `f_m(x)` for `x` in the closed cell of `m`.
    pub fn value(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.base.len() {
            return Err(Error::arity(self.base.len(), x.len()));
        }
        check_cell(&self.base.0, x)?;
        let t: Vec<f64> = self.base.0.iter().zip(x).map(|(&m, &xi)| sqrt_weight(m, xi)).collect();
        Ok(self.value_at_weights(&t))
    }

    /// `sum_S a_S prod_{i in S} t_i`.
    pub fn value_at_weights(&self, t: &[f64]) -> Complex64 {
        let mut prod = [0.0f64; 1 << MAX_ARITY];
        prod[0] = 1.0;
        let mut total = self.coeffs[0];
        for mask in 1..self.coeffs.len() {
            let low = mask.trailing_zeros() as usize;
            prod[mask] = prod[mask & (mask - 1)] * t[low];
            total += self.coeffs[mask] * prod[mask];
        }
        total
    }
}

/// `f(x) = f_m(x)` with `m = floor(x)`.
pub fn extend_eval(sigma: &LatticeFunction, x: &[f64]) -> Result<Complex64> {
    check_arity(sigma, x.len())?;
    check_point(x)?;
    let m = MultiIndex(x.iter().map(|v| v.floor() as usize).collect());
    CellEvaluation::new(sigma, &m)?.value(x)
}

/// The weights `B_J(x, m)` with `f_m(x) = sum_J sigma(m + e_J) B_J`; index 0 is `B_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BCoefficients {
    pub base: MultiIndex,
    pub weights: Vec<f64>,
}

impl BCoefficients {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sum_J sigma(m + e_J) B_J`.
    pub fn combine(&self, sigma: &LatticeFunction) -> Result<Complex64> {
        check_arity(sigma, self.base.len())?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(mask, &b)| sigma.at(&corner(&self.base.0, mask)) * b)
            .sum())
    }
}

fn cell_weights(m: &MultiIndex, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.len() {
        return Err(Error::arity(m.len(), x.len()));
    }
    if m.len() > MAX_ARITY {
        return Err(Error::Resource(format!("extension supports arity up to {MAX_ARITY}, got {}", m.len())));
    }
    check_cell(&m.0, x)?;
    Ok(m.0.iter().zip(x).map(|(&mi, &xi)| sqrt_weight(mi, xi)).collect())
}

/// `B_J = prod_{j in J} t_j prod_{i not in J} (1 - t_i)`.
pub fn b_coefficients(m: &MultiIndex, x: &[f64]) -> Result<BCoefficients> {
    let t = cell_weights(m, x)?;
    let k = t.len();
    let weights = (0..1usize << k)
        .map(|mask| (0..k).map(|i| if mask >> i & 1 == 1 { t[i] } else { 1.0 - t[i] }).product())
        .collect();
    Ok(BCoefficients { base: m.clone(), weights })
}

/// `B_J = prod_{j in J} t_j (1 + sum_{nonempty I outside J} (-1)^{|I|} prod_{i in I} t_i)`, the expanded sum.
pub fn b_coefficients_expanded(m: &MultiIndex, x: &[f64]) -> Result<BCoefficients> {
    let t = cell_weights(m, x)?;
    let k = t.len();
    let full = (1usize << k) - 1;
    let prod = |mask: usize| -> f64 { (0..k).filter(|i| mask >> i & 1 == 1).map(|i| t[i]).product() };
    let weights = (0..=full)
        .map(|j| {
            let rest = full & !j;
            let mut inner = 1.0;
            let mut i = rest;
            while i != 0 {
                let sign = if i.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                inner += sign * prod(i);
                i = (i - 1) & rest;
            }
            prod(j) * inner
        })
        .collect();
    Ok(BCoefficients { base: m.clone(), weights })
}

/// `(|prod a_i - prod b_i|, sum |a_i - b_i|)`.
pub fn product_difference(a: &[Complex64], b: &[Complex64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::arity(a.len(), b.len()));
    }
    let pa: Complex64 = a.iter().product();
    let pb: Complex64 = b.iter().product();
    Ok(((pa - pb).norm(), a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum()))
}

/// Grid scan of the extension over `[0, extent]^k` with spacing `1 / per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheckConfig {
    pub extent: usize,
    pub per_unit: usize,
}

impl Default for GridCheckConfig {
    fn default() -> Self {
        Self { extent: 6, per_unit: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
    pub difference: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheckReport {
    pub k: usize,
    pub grid_points: usize,
    /// `max |f|` over the grid.
    pub grid_sup: f64,
    /// `max |sigma|` over lattice points inside the grid.
    pub lattice_sup_inner: f64,
    /// `max |sigma|` over every lattice point the grid cells touch.
    pub lattice_sup_outer: f64,
    /// Pairs compared explicitly against the continuity bound.
    pub pairs_checked: u64,
    /// Pairs with `rho >= trivial_rho`, covered by `2 grid_sup <= bound`.
    pub trivial_rho: f64,
    pub violations: u64,
    /// Largest `difference / bound` among checked pairs.
    pub worst_ratio: f64,
    pub worst: Option<ContinuityWitness>,
}

impl GridCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
            && self.grid_sup <= self.lattice_sup_outer + 1e-12
            && self.grid_sup >= self.lattice_sup_inner
    }
}

/// Evaluates `f` on the grid and checks the sup-norm identity and the continuity bound
/// `|f(x) - f(y)| <= continuity_bound(rho(x, y)) + 1e-12`.
///
/// `omega` and the sup in the bound come from `sigma` on the lattice window the grid cells
/// touch; both are lower bounds for their values on all of `N_0^k`, so the check is strict.
/// Pairs are compared along the first axis slab by slab; at `k = 1` every pair is compared,
/// otherwise every pair with `rho` below the trivial threshold.
pub fn grid_check(sigma: &LatticeFunction, config: GridCheckConfig) -> Result<GridCheckReport> {
    let k = sigma.arity();
    if k > 3 {
        return Err(Error::Resource(format!("grid checks support arity up to 3, got {k}")));
    }
    if config.extent == 0 || config.per_unit == 0 {
        return Err(Error::param("grid extent and resolution must be positive"));
    }
    let outer = Window::cube(k, config.extent + 1);
    let inner = Window::cube(k, config.extent);
    let omega = ModulusTable::from_lattice(sigma, &outer)?;
    let sup_outer = outer.points().map(|m| sigma.at(&m.0).norm()).fold(0.0, f64::max);
    let sup_inner = inner.points().map(|m| sigma.at(&m.0).norm()).fold(0.0, f64::max);

    let n = config.extent * config.per_unit + 1;
    let xs: Vec<f64> = (0..n).map(|g| g as f64 / config.per_unit as f64).collect();
    let cells: Vec<usize> = xs.iter().map(|x| (x.floor() as usize).min(config.extent)).collect();
    let ts: Vec<f64> = xs.iter().zip(&cells).map(|(&x, &m)| sqrt_weight(m, x)).collect();

    let a_k = continuity_constant(k);
    let trivial_rho = 1.0 / (4.0 * a_k * a_k);
    let top = config.extent as f64;
    let h = 1.0 / config.per_unit as f64;
    let radius = if k == 1 {
        n - 1
    } else {
        (1..n).take_while(|&j| top.sqrt() - (top - j as f64 * h).sqrt() < trivial_rho).last().unwrap_or(0)
    };

    let slab_len = n.pow(k as u32 - 1);
    let slab_point = |s: usize, idx: usize| -> Vec<usize> {
        let mut out = vec![s; k];
        let mut rest = idx;
        for d in (1..k).rev() {
            out[d] = rest % n;
            rest /= n;
        }
        out
    };
    let eval_slab = |s: usize| -> Result<Vec<Complex64>> {
        (0..slab_len)
            .into_par_iter()
            .map_init(
                || None::<CellEvaluation>,
                |cache, idx| {
                    let g = slab_point(s, idx);
                    let m: Vec<usize> = g.iter().map(|&gi| cells[gi]).collect();
                    if cache.as_ref().is_none_or(|c| c.base.0 != m) {
                        *cache = Some(CellEvaluation::new(sigma, &MultiIndex(m))?);
                    }
                    let t: Vec<f64> = g.iter().map(|&gi| ts[gi]).collect();
                    Ok(cache.as_ref().expect("cache filled").value_at_weights(&t))
                },
            )
            .collect()
    };

    // offsets in the trailing axes, as signed steps
    let span = 2 * radius as i64 + 1;
    let offsets: Vec<Vec<i64>> = (0..span.pow(k as u32 - 1))
        .map(|mut c| {
            let mut o = vec![0i64; k - 1];
            for d in (0..k - 1).rev() {
                o[d] = c % span - radius as i64;
                c /= span;
            }
            o
        })
        .collect();

    #[derive(Default, Clone)]
    struct Acc {
        pairs: u64,
        violations: u64,
        ratio: f64,
        worst: Worst,
    }
    type Worst = Option<(Vec<usize>, Vec<usize>, f64, f64, f64)>;
    // ties go to the lexicographically smallest pair so the witness does not depend on work splitting
    fn better(r: f64, x: &[usize], y: &[usize], best_r: f64, best: &Worst) -> bool {
        match best {
            None => true,
            Some(b) => r > best_r || (r == best_r && (x, y) < (b.0.as_slice(), b.1.as_slice())),
        }
    }
    let merge = |mut a: Acc, b: Acc| {
        a.pairs += b.pairs;
        a.violations += b.violations;
        if b.worst.as_ref().is_some_and(|w| better(b.ratio, &w.0, &w.1, a.ratio, &a.worst)) {
            a.ratio = b.ratio;
            a.worst = b.worst;
        }
        a
    };

    let mut ring: VecDeque<Vec<Complex64>> = VecDeque::with_capacity(radius + 1);
    let mut total = Acc::default();
    let mut grid_sup = 0.0f64;
    for s in 0..n {
        let current = eval_slab(s)?;
        grid_sup = current.iter().map(|v| v.norm()).fold(grid_sup, f64::max);
        if ring.len() == radius + 1 {
            ring.pop_back();
        }
        ring.push_front(current);
        // ring[d] holds slab s - d
        let acc = (0..slab_len)
            .into_par_iter()
            .fold(Acc::default, |mut acc, idx| {
                let gx = slab_point(s, idx);
                let x: Vec<f64> = gx.iter().map(|&g| xs[g]).collect();
                let fx = ring[0][idx];
                for (d, slab) in ring.iter().enumerate() {
                    for o in &offsets {
                        // each unordered pair once: within the slab only lexicographically later offsets
                        if d == 0 && o.iter().find(|&&v| v != 0).is_none_or(|&v| v < 0) {
                            continue;
                        }
                        let mut gy = vec![s - d; k];
                        let mut ok = true;
                        for a in 1..k {
                            let v = gx[a] as i64 + o[a - 1];
                            if v < 0 || v >= n as i64 {
                                ok = false;
                                break;
                            }
                            gy[a] = v as usize;
                        }
                        if !ok {
                            continue;
                        }
                        let jdx = gy[1..].iter().fold(0usize, |acc, &g| acc * n + g);
                        let y: Vec<f64> = gy.iter().map(|&g| xs[g]).collect();
                        let r = rho_real(&x, &y);
                        if r == 0.0 {
                            continue;
                        }
                        let diff = (fx - slab[jdx]).norm();
                        let bound = continuity_bound(k, sup_outer, |t| omega.eval(t), r);
                        acc.pairs += 1;
                        if diff > bound + 1e-12 {
                            acc.violations += 1;
                        }
                        let ratio = if bound > 0.0 { diff / bound } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
                        if better(ratio, &gx, &gy, acc.ratio, &acc.worst) {
                            acc.ratio = ratio;
                            acc.worst = Some((gx.clone(), gy, r, diff, bound));
                        }
                    }
                }
                acc
            })
            .reduce(Acc::default, merge);
        total = merge(total, acc);
    }
    let to_x = |g: &[usize]| g.iter().map(|&v| xs[v]).collect::<Vec<f64>>();
    Ok(GridCheckReport {
        k,
        grid_points: n.pow(k as u32),
        grid_sup,
        lattice_sup_inner: sup_inner,
        lattice_sup_outer: sup_outer,
        pairs_checked: total.pairs,
        trivial_rho,
        violations: total.violations,
        worst_ratio: total.ratio,
        worst: total.worst.map(|(a, b, rho, difference, bound)| ContinuityWitness {
            x: to_x(&a),
            y: to_x(&b),
            rho,
            difference,
            bound,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::parse_lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(k: usize, side: usize, rng: &mut ChaCha8Rng) -> LatticeFunction {
        let cells = side.pow(k as u32);
        let values = (0..cells).map(|_| Complex64::new(rng.random_range(-5..=5) as f64, 0.0)).collect();
        LatticeFunction::table(vec![side; k], values, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn constants_a_k() {
        assert_eq!(continuity_constant(1), 1.0);
        assert_eq!(continuity_constant(2), 6.0);
        assert_eq!(continuity_constant(3), 27.0);
    }

    #[test]
    fn single_coordinate_coefficient() {
        let s = parse_lattice(r#"{"kind":"table","shape":[4,4],"values":[0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15],"tail":0}"#)
            .unwrap();
        let m = MultiIndex(vec![1, 2]);
        let a = coeff(&s, &m, &[0]).unwrap();
        assert_eq!(a, s.at(&[2, 2]) - s.at(&[1, 2]));
    }

    #[test]
    fn product_coefficient_hand_expansion() {
        let side = 3;
        let values = (0..side * side).map(|i| Complex64::new(((i / side) * (i % side)) as f64, 0.0)).collect();
        let s = LatticeFunction::table(vec![side, side], values, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(coeff(&s, &MultiIndex(vec![0, 0]), &[0, 1]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn direct_and_recurrence_agree_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..=4 {
            let s = random_table(k, 5, &mut rng);
            let cell = CellEvaluation::new(&s, &MultiIndex(vec![1; k])).unwrap();
            for mask in 1..1usize << k {
                let subset: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
                let m = MultiIndex(vec![1; k]);
                let d = coeff(&s, &m, &subset).unwrap();
                assert_eq!(d, coeff_recurrence(&s, &m, &subset).unwrap());
                assert_eq!(d, cell.coefficient(mask));
            }
        }
    }

    #[test]
    fn malformed_subsets() {
        let s = LatticeFunction::constant(1.0, 2);
        let m = MultiIndex(vec![0, 0]);
        assert!(coeff(&s, &m, &[]).is_err());
        assert!(coeff(&s, &m, &[1, 0]).is_err());
        assert!(coeff(&s, &m, &[2]).is_err());
    }

    #[test]
    fn restriction_and_one_dimensional_formula() {
        let s = parse_lattice(r#"{"kind":"table","shape":[2],"values":[0,1],"tail":1}"#).unwrap();
        assert_eq!(extend_eval(&s, &[0.25]).unwrap().re, 0.5);
        assert_eq!(extend_eval(&s, &[1.0]).unwrap().re, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_table(2, 6, &mut rng);
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(extend_eval(&t, &[a as f64, b as f64]).unwrap(), t.at(&[a, b]));
            }
        }
        assert!(matches!(extend_eval(&t, &[-0.5, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn neighbouring_cells_agree_on_shared_face() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_table(2, 6, &mut rng);
        let x = [1.0, 0.5];
        let left = CellEvaluation::new(&s, &MultiIndex(vec![0, 0])).unwrap().value(&x).unwrap();
        let right = CellEvaluation::new(&s, &MultiIndex(vec![1, 0])).unwrap().value(&x).unwrap();
        assert!((left - right).norm() <= 1e-12);
        assert!(CellEvaluation::new(&s, &MultiIndex(vec![2, 0])).unwrap().value(&x).is_err());
    }

    #[test]
    fn b_coefficients_examples() {
        let b = b_coefficients(&MultiIndex(vec![3, 1]), &[3.0, 1.0]).unwrap();
        assert_eq!(b.weights, vec![1.0, 0.0, 0.0, 0.0]);
        let mid = ((4f64.sqrt() + 5f64.sqrt()) / 2.0).powi(2);
        let b = b_coefficients(&MultiIndex(vec![4]), &[mid]).unwrap();
        assert!((b.weights[0] - 0.5).abs() < 1e-14 && (b.weights[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn b_partition_of_unity_and_reproduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 1..=3 {
            let s = random_table(k, 6, &mut rng);
            for _ in 0..2000 {
                let m = MultiIndex((0..k).map(|_| rng.random_range(0..5)).collect());
                let x: Vec<f64> = m.0.iter().map(|&v| v as f64 + rng.random::<f64>()).collect();
                let b = b_coefficients(&m, &x).unwrap();
                let e = b_coefficients_expanded(&m, &x).unwrap();
                assert!((b.sum() - 1.0).abs() <= 1e-12);
                assert!(b.min() >= -1e-12 && e.min() >= -1e-12);
                for (p, q) in b.weights.iter().zip(&e.weights) {
                    assert!((p - q).abs() <= 1e-12);
                }
                let f = extend_eval(&s, &x).unwrap();
                assert!((b.combine(&s).unwrap() - f).norm() <= 1e-12);
                assert!(f.norm() <= 5.0 + 1e-12);
            }
        }
        assert!(b_coefficients(&MultiIndex(vec![1]), &[2.5]).is_err());
    }

    #[test]
    fn product_difference_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let unit = |rng: &mut ChaCha8Rng| Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random::<f64>() * 6.3);
        for _ in 0..10_000 {
            let l = rng.random_range(1..=8);
            let a: Vec<Complex64> = (0..l).map(|_| unit(&mut rng)).collect();
            let b: Vec<Complex64> = (0..l).map(|_| unit(&mut rng)).collect();
            let (lhs, rhs) = product_difference(&a, &b).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn grid_check_small() {
        let s = LatticeFunction::sqrt_expr(crate::symbol::Expr::Sin { coord: 0, freq: 2.0 }, 1).unwrap();
        let r = grid_check(&s, GridCheckConfig::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.pairs_checked, 601 * 600 / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_table(2, 8, &mut rng);
        let r = grid_check(&t, GridCheckConfig::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.pairs_checked > 0);
        assert_eq!(r.lattice_sup_inner, r.grid_sup);
    }
}
