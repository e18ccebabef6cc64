//! The function `g(i, j) = sin(sqrt j - sqrt i)` for `sqrt j in [sqrt i, sqrt i + pi)`, else 0.
//! It is 1-Lipschitz for `rho_2`, yet its rows `g~(i) = g(i, .)` are uniformly separated,
//! so it is not a norm limit of sums of products of one-variable functions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Distance to the interval ends below which a point is excluded from bound assertions.
pub const GUARD_BAND: f64 = 1e-12;

/// `sqrt j - sqrt i` without cancellation.
pub fn root_gap(i: u64, j: u64) -> f64 {
    if i == j {
        return 0.0;
    }
    (j as f64 - i as f64) / ((j as f64).sqrt() + (i as f64).sqrt())
}

pub fn g_value(i: u64, j: u64) -> f64 {
    let d = root_gap(i, j);
    if (0.0..PI).contains(&d) {
        d.sin()
    } else {
        0.0
    }
}

/// Whether `(i, j)` sits within the guard band of an interval end.
pub fn near_edge(i: u64, j: u64) -> bool {
    let d = root_gap(i, j);
    (d - PI).abs() < GUARD_BAND || (d != 0.0 && d.abs() < GUARD_BAND)
}

/// Last `j` whose square root can lie in `[sqrt i, sqrt i + pi)`.
fn row_end(i: u64) -> u64 {
    let top = (i as f64).sqrt() + PI;
    (top * top).ceil() as u64
}

/// `max_j |g(i, j)|` over the support of row `i`, with the maximizing `j`.
pub fn row_sup(i: u64) -> (f64, u64) {
    (i..=row_end(i))
        .map(|j| (g_value(i, j).abs(), j))
        .fold((0.0, i), |best, c| if c.0 > best.0 { c } else { best })
}

/// `sup_j |g(i1, j) - g(i2, j)|` over both row supports.
pub fn row_separation(i1: u64, i2: u64) -> f64 {
    let scan = |lo: u64, hi: u64| (lo..=hi).map(|j| (g_value(i1, j) - g_value(i2, j)).abs()).fold(0.0, f64::max);
    scan(i1, row_end(i1)).max(scan(i2, row_end(i2)))
}

fn rho2(a: (u64, u64), b: (u64, u64)) -> f64 {
    root_gap(a.0, b.0).abs() + root_gap(a.1, b.1).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzScan {
    pub pairs: u64,
    pub excluded: u64,
    /// Largest `|g(p) - g(q)| - rho_2(p, q)`.
    pub max_excess: f64,
    pub worst: Option<[[u64; 2]; 2]>,
}

/// Samples distinct pairs `p, q` in `[0, bound]^2` with `rho_2(p, q) < pi` and records how far
/// `|g(p) - g(q)|` exceeds `rho_2(p, q)`.
pub fn lipschitz_scan(pairs: u64, bound: u64, seed: u64) -> LipschitzScan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = (bound as f64).sqrt();
    let mut sample = Vec::with_capacity(pairs as usize);
    while (sample.len() as u64) < pairs {
        let p = (rng.random_range(0..=bound), rng.random_range(0..=bound));
        // perturb in square-root coordinates so that rho_2 < pi
        let budget = rng.random::<f64>() * PI;
        let split = rng.random::<f64>();
        let sign = |r: &mut ChaCha8Rng| if r.random::<bool>() { 1.0 } else { -1.0 };
        let du = sign(&mut rng) * budget * split;
        let dv = sign(&mut rng) * budget * (1.0 - split);
        let move_to = |x: u64, d: f64| {
            let r = ((x as f64).sqrt() + d).clamp(0.0, top);
            ((r * r).round() as u64).min(bound)
        };
        let q = (move_to(p.0, du), move_to(p.1, dv));
        if q != p && rho2(p, q) < PI {
            sample.push((p, q));
        }
    }
    let results: Vec<(bool, f64)> = sample
        .par_iter()
        .map(|&(p, q)| {
            if near_edge(p.0, p.1) || near_edge(q.0, q.1) {
                (true, f64::NEG_INFINITY)
            } else {
                (false, (g_value(p.0, p.1) - g_value(q.0, q.1)).abs() - rho2(p, q))
            }
        })
        .collect();
    let mut scan = LipschitzScan { pairs, excluded: 0, max_excess: f64::NEG_INFINITY, worst: None };
    for (&(p, q), &(excluded, excess)) in sample.iter().zip(&results) {
        if excluded {
            scan.excluded += 1;
        } else if excess > scan.max_excess {
            scan.max_excess = excess;
            scan.worst = Some([[p.0, p.1], [q.0, q.1]]);
        }
    }
    scan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSupScan {
    pub rows: u64,
    pub min_sup: f64,
    pub argmin: u64,
}

/// Smallest row sup over the given rows.
pub fn row_sup_scan(rows: &[u64]) -> RowSupScan {
    let sups: Vec<f64> = rows.par_iter().map(|&i| row_sup(i).0).collect();
    let (min_sup, argmin) = rows
        .iter()
        .zip(&sups)
        .fold((f64::INFINITY, 0), |best, (&i, &s)| if s < best.0 { (s, i) } else { best });
    RowSupScan { rows: rows.len() as u64, min_sup, argmin }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationScan {
    pub pairs: u64,
    pub min_separation: f64,
    pub worst: Option<[u64; 2]>,
}

/// Random row pairs in `[0, bound]` with `|sqrt i1 - sqrt i2| > pi` (outside the guard band).
pub fn separation_scan(pairs: u64, bound: u64, seed: u64) -> SeparationScan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::with_capacity(pairs as usize);
    while (sample.len() as u64) < pairs {
        let a = rng.random_range(0..=bound);
        let b = rng.random_range(0..=bound);
        if root_gap(a, b).abs() > PI + GUARD_BAND {
            sample.push((a, b));
        }
    }
    let seps: Vec<f64> = sample.par_iter().map(|&(a, b)| row_separation(a, b)).collect();
    let mut scan = SeparationScan { pairs, min_separation: f64::INFINITY, worst: None };
    for (&(a, b), &s) in sample.iter().zip(&seps) {
        if s < scan.min_separation {
            scan.min_separation = s;
            scan.worst = Some([a, b]);
        }
    }
    scan
}

/// Greedy `radius`-net of the rows `g~(i)`: each row joins the first center within
/// `radius`, or becomes a new center.
pub fn greedy_net(rows: &[u64], radius: f64) -> Vec<u64> {
    let mut centers: Vec<u64> = Vec::new();
    for &i in rows {
        let covered = centers.par_iter().any(|&c| row_separation(c, i) <= radius);
        if !covered {
            centers.push(i);
        }
    }
    centers
}

/// Rows `round((t * spacing)^2)` for `t < count`, spaced `spacing` apart in the square root.
pub fn root_spaced_rows(count: u64, spacing: f64) -> Vec<u64> {
    (0..count).map(|t| ((t as f64 * spacing).powi(2)).round() as u64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(g_value(7, 7), 0.0);
        assert!((g_value(0, 4) - 2f64.sin()).abs() < 1e-15);
        assert!((g_value(0, 4) - 0.9092974).abs() < 1e-7);
        assert_eq!(g_value(0, 10), 0.0);
        assert_eq!(g_value(5, 3), 0.0);
    }

    #[test]
    fn row_sups() {
        let (s, j) = row_sup(0);
        assert!(s >= 0.987, "{s}");
        assert_eq!(j, 2);
        assert!(row_sup(100).0 >= 0.5);
        assert!(row_sup(1_000_000).0 >= 0.5);
    }

    #[test]
    fn separations() {
        assert_eq!(row_separation(9, 9), 0.0);
        assert!(row_separation(0, 16) >= 0.5);
        let v = row_separation(0, 1);
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn lipschitz_sample() {
        let s = lipschitz_scan(5000, 4000, 1);
        assert!(s.max_excess <= 1e-12, "{s:?}");
    }

    #[test]
    fn no_small_net() {
        let rows = root_spaced_rows(40, PI + 0.1);
        assert_eq!(greedy_net(&rows, 0.25).len(), rows.len());
    }
}
