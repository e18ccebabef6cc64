//! Monte Carlo Toeplitz matrix entries `<T_phi q_alpha, q_beta> = int phi q_alpha conj(q_beta) d lambda_n`
//! on the monomial basis `q_alpha = z^alpha / sqrt(alpha!)` of the Fock space.
//! Nothing here uses the eigenvalue formula, so it serves as an independent check.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::index::Partition;
use crate::quad::{gaussian_mc, gaussian_mc_many, McEstimate};
use crate::symbol::QuasiRadialSymbol;

pub const DEFAULT_BASIS_CAP: usize = 10_000;
pub const MIN_ENTRY_SAMPLES: u64 = 10_000;

/// `ln(alpha!) = sum_j ln(alpha_j!)`.
fn ln_factorial(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| statrs::function::factorial::ln_factorial(a as u64)).sum()
}

/// `q_alpha(z) = prod z_j^{alpha_j} / sqrt(alpha!)`.
pub fn monomial_eval(alpha: &[usize], z: &[Complex64]) -> Result<Complex64> {
    if alpha.len() != z.len() {
        return Err(Error::arity(alpha.len(), z.len()));
    }
    let p: Complex64 = alpha.iter().zip(z).map(|(&a, zj)| zj.powu(a as u32)).product();
    Ok(p * (-0.5 * ln_factorial(alpha)).exp())
}

/// Degree profile `(|alpha_(1)|, ..., |alpha_(k)|)` of a multi-index grouped by `partition`.
pub fn degree_profile(alpha: &[usize], partition: &Partition) -> Result<Vec<usize>> {
    if alpha.len() != partition.total() {
        return Err(Error::arity(partition.total(), alpha.len()));
    }
    Ok((0..partition.k())
        .map(|j| {
            let off = partition.offset(j);
            alpha[off..off + partition.parts()[j]].iter().sum()
        })
        .collect())
}

/// All `alpha in N_0^n` with `|alpha| <= max_degree`, ordered by degree then lexicographically.
pub fn enumerate_basis(n: usize, max_degree: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    // C(n + d, d) without overflow for the sizes that pass the cap
    let mut count = 1f64;
    for i in 1..=max_degree {
        count = count * (n + i) as f64 / i as f64;
    }
    if count > cap as f64 {
        return Err(Error::Resource(format!("basis has {count:.0} indices, cap is {cap}")));
    }
    let mut out = Vec::with_capacity(count.round() as usize);
    for d in 0..=max_degree {
        let mut cur = vec![0usize; n];
        compositions(d, 0, &mut cur, &mut out);
    }
    Ok(out)
}

fn compositions(rest: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == cur.len() {
        cur[pos] = rest;
        out.push(cur.clone());
        return;
    }
    for v in (0..=rest).rev() {
        cur[pos] = v;
        compositions(rest - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// The function `z -> a(|z_(1)|, ..., |z_(k)|)` on `C^n`.
pub fn radial_function<'a>(
    a: &'a QuasiRadialSymbol,
    partition: &Partition,
) -> Result<impl Fn(&[Complex64]) -> Complex64 + Sync + 'a> {
    if a.arity() != partition.k() {
        return Err(Error::arity(partition.k(), a.arity()));
    }
    let blocks: Vec<(usize, usize)> = (0..partition.k()).map(|j| (partition.offset(j), partition.parts()[j])).collect();
    Ok(move |z: &[Complex64]| {
        let mut s = [0.0f64; 16];
        let k = blocks.len().min(16);
        for (j, &(off, len)) in blocks.iter().take(k).enumerate() {
            s[j] = z[off..off + len].iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        }
        a.expr().eval(&s[..k])
    })
}

/// One Toeplitz entry `<T_phi q_alpha, q_beta>`.
pub fn toeplitz_entry<F>(
    phi: F,
    partition: &Partition,
    alpha: &[usize],
    beta: &[usize],
    samples: u64,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let n = partition.total();
    if alpha.len() != n || beta.len() != n {
        return Err(Error::arity(n, if alpha.len() != n { alpha.len() } else { beta.len() }));
    }
    if samples < MIN_ENTRY_SAMPLES {
        return Err(Error::param(format!("toeplitz entries need at least {MIN_ENTRY_SAMPLES} samples")));
    }
    let na = (-0.5 * ln_factorial(alpha)).exp();
    let nb = (-0.5 * ln_factorial(beta)).exp();
    gaussian_mc(
        |z| {
            let qa: Complex64 = alpha.iter().zip(z).map(|(&a, w)| w.powu(a as u32)).product::<Complex64>() * na;
            let qb: Complex64 = beta.iter().zip(z).map(|(&b, w)| w.powu(b as u32)).product::<Complex64>() * nb;
            phi(z) * qa * qb.conj()
        },
        n,
        samples,
        seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub profile: Vec<usize>,
    /// Largest pairwise difference of diagonal entries inside the block.
    pub spread: f64,
    /// Largest `|difference| / std_error(difference)` inside the block.
    pub spread_z: f64,
    pub diag_mean: Complex64,
    pub diag_stderr: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonal {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub mean: Complex64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub max_offdiag: f64,
    /// Largest `|entry| / std_error` over off-diagonal entries.
    pub max_offdiag_z: f64,
    /// The off-diagonal entry attaining `max_offdiag_z`.
    pub worst_offdiag: Option<OffDiagonal>,
    pub blocks: Vec<BlockSummary>,
    pub basis: Vec<Vec<usize>>,
    /// Every diagonal entry, in basis order.
    pub diagonal: Vec<McEstimate>,
    pub samples: u64,
    pub seed: u64,
}

/// All entries `<T_phi q_alpha, q_beta>` for `|alpha|, |beta| <= max_degree` from one
/// shared sample stream, summarized per degree-profile block.
pub fn diagonalization_report<F>(
    phi: F,
    partition: &Partition,
    max_degree: usize,
    samples: u64,
    seed: u64,
) -> Result<BlockReport>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    if max_degree < 1 {
        return Err(Error::param("max_degree must be >= 1"));
    }
    let n = partition.total();
    let basis = enumerate_basis(n, max_degree, DEFAULT_BASIS_CAP)?;
    let nb = basis.len();
    let profiles: Vec<Vec<usize>> = basis.iter().map(|a| degree_profile(a, partition)).collect::<Result<_>>()?;
    let mut block_keys: Vec<Vec<usize>> = profiles.clone();
    block_keys.sort();
    block_keys.dedup();
    let members: Vec<Vec<usize>> = block_keys
        .iter()
        .map(|key| (0..nb).filter(|&i| &profiles[i] == key).collect())
        .collect();
    // ordered pairs inside blocks for diagonal differences
    let pairs: Vec<(usize, usize)> = members
        .iter()
        .flat_map(|m| {
            m.iter()
                .enumerate()
                .flat_map(move |(x, &i)| m[x + 1..].iter().map(move |&j| (i, j)))
        })
        .collect();
    let norms: Vec<f64> = basis.iter().map(|a| (-0.5 * ln_factorial(a)).exp()).collect();

    let est = gaussian_mc_many(n, samples, seed, nb * nb + pairs.len(), |z, out| {
        let mut pows = vec![Complex64::new(1.0, 0.0); n * (max_degree + 1)];
        for j in 0..n {
            for e in 1..=max_degree {
                pows[j * (max_degree + 1) + e] = pows[j * (max_degree + 1) + e - 1] * z[j];
            }
        }
        let q: Vec<Complex64> = basis
            .iter()
            .zip(&norms)
            .map(|(a, &c)| {
                a.iter()
                    .enumerate()
                    .map(|(j, &e)| pows[j * (max_degree + 1) + e])
                    .product::<Complex64>()
                    * c
            })
            .collect();
        let v = phi(z);
        for a in 0..nb {
            let va = v * q[a];
            for b in 0..nb {
                out[a * nb + b] = va * q[b].conj();
            }
        }
        for (p, &(i, j)) in pairs.iter().enumerate() {
            out[nb * nb + p] = v * (q[i].norm_sqr() - q[j].norm_sqr());
        }
    })?;

    let mut max_offdiag = 0.0f64;
    let mut max_z = 0.0f64;
    let mut worst = None;
    for a in 0..nb {
        for b in 0..nb {
            if a == b {
                continue;
            }
            let e = est[a * nb + b];
            let size = e.mean.norm();
            max_offdiag = max_offdiag.max(size);
            let z = if e.std_error > 0.0 { size / e.std_error } else if size > 0.0 { f64::INFINITY } else { 0.0 };
            if z > max_z {
                max_z = z;
                worst = Some(OffDiagonal {
                    alpha: basis[a].clone(),
                    beta: basis[b].clone(),
                    mean: e.mean,
                    std_error: e.std_error,
                });
            }
        }
    }
    let diagonal: Vec<McEstimate> = (0..nb).map(|a| est[a * nb + a]).collect();
    let mut blocks = Vec::with_capacity(block_keys.len());
    let mut pair_pos = 0;
    for (key, m) in block_keys.iter().zip(&members) {
        let mut spread = 0.0f64;
        let mut spread_z = 0.0f64;
        let count = m.len() * (m.len() - 1) / 2;
        for p in pair_pos..pair_pos + count {
            let d = est[nb * nb + p];
            spread = spread.max(d.mean.norm());
            let z = if d.std_error > 0.0 { d.mean.norm() / d.std_error } else { 0.0 };
            spread_z = spread_z.max(z);
        }
        pair_pos += count;
        let mean = m.iter().map(|&i| diagonal[i].mean).sum::<Complex64>() / m.len() as f64;
        let stderr = m.iter().map(|&i| diagonal[i].std_error).fold(0.0, f64::max);
        blocks.push(BlockSummary {
            profile: key.clone(),
            spread,
            spread_z,
            diag_mean: mean,
            diag_stderr: stderr,
            size: m.len(),
        });
    }
    Ok(BlockReport { max_offdiag, max_offdiag_z: max_z, worst_offdiag: worst, blocks, basis, diagonal, samples, seed })
}

/// `int_{S^{2q-1}} |p_alpha|^2 d sigma` by normalizing Gaussian samples and
/// scaling by the sphere area `2 pi^q / Gamma(q)`.
pub fn sphere_monomial_norm(alpha: &[usize], q: usize, samples: u64, seed: u64) -> Result<McEstimate> {
    if q == 0 || alpha.len() != q {
        return Err(Error::arity(q, alpha.len()));
    }
    let area = (q as f64 * PI.ln() + std::f64::consts::LN_2 - ln_gamma(q as f64)).exp();
    gaussian_mc(
        |z| {
            let r2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
            let p: f64 = alpha.iter().zip(z).map(|(&a, w)| w.norm_sqr().powi(a as i32)).product();
            let m: usize = alpha.iter().sum();
            Complex64::new(area * p / r2.powi(m as i32), 0.0)
        },
        q,
        samples,
        seed,
    )
}

/// `2 pi^q alpha! / Gamma(q + |alpha|)`.
pub fn sphere_monomial_norm_exact(alpha: &[usize]) -> f64 {
    let q = alpha.len() as f64;
    let m: usize = alpha.iter().sum();
    (std::f64::consts::LN_2 + q * PI.ln() + ln_factorial(alpha) - ln_gamma(q + m as f64)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MultiIndex;
    use crate::spectrum::eigenvalue;
    use crate::symbol::parse_symbol;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn monomials() {
        assert_eq!(monomial_eval(&[0, 0], &[c(3.0, 1.0), c(-2.0, 0.5)]).unwrap(), c(1.0, 0.0));
        let v = monomial_eval(&[2], &[c(1.0, 1.0)]).unwrap();
        assert!((v - c(0.0, 2f64.sqrt())).norm() < 1e-15);
        let v = monomial_eval(&[1, 1], &[c(2.0, 0.0), c(0.0, 3.0)]).unwrap();
        assert!((v - c(0.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn basis_enumeration() {
        let b = enumerate_basis(3, 4, DEFAULT_BASIS_CAP).unwrap();
        assert_eq!(b.len(), 35);
        assert_eq!(b[0], vec![0, 0, 0]);
        assert!(enumerate_basis(10, 10, DEFAULT_BASIS_CAP).is_err());
        let p = Partition::new(vec![2, 1]).unwrap();
        assert_eq!(degree_profile(&[1, 2, 3], &p).unwrap(), vec![3, 3]);
    }

    #[test]
    fn identity_entries() {
        let p = Partition::new(vec![2, 1]).unwrap();
        let one = |_: &[Complex64]| c(1.0, 0.0);
        let d = toeplitz_entry(one, &p, &[1, 0, 2], &[1, 0, 2], 200_000, 3).unwrap();
        assert!((d.mean - c(1.0, 0.0)).norm() <= 4.0 * d.std_error);
        let o = toeplitz_entry(one, &p, &[1, 0, 2], &[0, 1, 2], 200_000, 3).unwrap();
        assert!(o.mean.norm() <= 4.0 * o.std_error);
        assert!(toeplitz_entry(one, &p, &[1, 0], &[0, 1, 2], 200_000, 3).is_err());
        assert!(toeplitz_entry(one, &p, &[0, 0, 0], &[0, 0, 0], 500, 3).is_err());
    }

    #[test]
    fn radial_square_entry() {
        let p = Partition::new(vec![1]).unwrap();
        let a = parse_symbol(r#"{"kind":"power","coord":0,"exponent":2,"cap":1e8}"#).unwrap();
        let phi = radial_function(&a, &p).unwrap();
        let e = toeplitz_entry(&phi, &p, &[3], &[3], 400_000, 8).unwrap();
        assert!((e.mean.re - 4.0).abs() <= 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn box_symbol_is_block_diagonal() {
        let p = Partition::new(vec![2, 1]).unwrap();
        let a = parse_symbol(r#"{"kind":"box","lower":[0,0],"upper":[1,1]}"#).unwrap();
        let phi = radial_function(&a, &p).unwrap();
        let r = diagonalization_report(&phi, &p, 2, 200_000, 1).unwrap();
        assert!(r.max_offdiag_z <= 5.0, "{:?}", r.worst_offdiag);
        for (alpha, d) in r.basis.iter().zip(&r.diagonal) {
            let prof = degree_profile(alpha, &p).unwrap();
            let g = eigenvalue(&a, &p, &MultiIndex(prof)).unwrap();
            assert!((d.mean - g).norm() <= 4.0 * d.std_error, "{alpha:?}: {} vs {g}", d.mean);
        }
    }

    #[test]
    fn real_part_is_detected() {
        let p = Partition::new(vec![2, 1]).unwrap();
        let r = diagonalization_report(|z: &[Complex64]| c(z[0].re, 0.0), &p, 1, 100_000, 2).unwrap();
        assert!(r.max_offdiag_z > 6.0);
        let w = r.worst_offdiag.unwrap();
        assert!((w.mean.norm() - 0.5).abs() <= 4.0 * w.std_error);
    }

    #[test]
    fn sphere_norms() {
        let e = sphere_monomial_norm(&[0], 1, 10_000, 1).unwrap();
        assert!((e.mean.re - 2.0 * PI).abs() < 1e-12);
        let e = sphere_monomial_norm(&[1], 1, 10_000, 1).unwrap();
        assert!((e.mean.re - 2.0 * PI).abs() < 1e-12);
        let e = sphere_monomial_norm(&[1, 0], 2, 400_000, 1).unwrap();
        assert!((e.mean.re - PI * PI).abs() <= 4.0 * e.std_error);
        assert!((sphere_monomial_norm_exact(&[1, 0]) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn norm_lemma() {
        let alpha = [2usize, 1, 0];
        let e = gaussian_mc(
            |z| c(alpha.iter().zip(z).map(|(&a, w)| w.norm_sqr().powi(a as i32)).product(), 0.0),
            3,
            400_000,
            4,
        )
        .unwrap();
        assert!((e.mean.re - 2.0).abs() <= 4.0 * e.std_error);
    }
}
