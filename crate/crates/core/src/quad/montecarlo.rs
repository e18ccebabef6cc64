//! Deterministic Monte Carlo against the Gaussian measure `lambda_n` on `C^n`
//! and against products of Gamma distributions.
//!
//! Samples are grouped in fixed chunks; chunk `c` draws from the ChaCha8
//! stream `c` of the generator seeded with `seed`, so sample `i` depends only
//! on `(seed, i)`. Chunk statistics are merged in chunk order, which makes the
//! result independent of the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbol::QuasiRadialSymbol;

pub const MIN_SAMPLES: u64 = 1000;
const CHUNK: u64 = 4096;
/// Chunks processed per parallel batch before merging.
const BATCH: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: Complex64,
    /// `sqrt((var_re + var_im) / samples)` with sample variances.
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Running moments of one complex output: count, means and centered sums of squares.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean_re: f64,
    m2_re: f64,
    mean_im: f64,
    m2_im: f64,
}

impl Moments {
    /// Chan et al. pairwise merge.
    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d_re = o.mean_re - self.mean_re;
        let d_im = o.mean_im - self.mean_im;
        self.mean_re += d_re * o.n / n;
        self.mean_im += d_im * o.n / n;
        self.m2_re += o.m2_re + d_re * d_re * self.n * o.n / n;
        self.m2_im += o.m2_im + d_im * d_im * self.n * o.n / n;
        self.n = n;
    }
}

/// Shifted sums for one output within a chunk; the shift is the first value seen.
#[derive(Debug, Clone, Copy, Default)]
struct ShiftedSums {
    shift: Complex64,
    sum_re: f64,
    sum_im: f64,
    sq_re: f64,
    sq_im: f64,
}

impl ShiftedSums {
    fn moments(&self, n: f64) -> Moments {
        if n == 0.0 {
            return Moments::default();
        }
        Moments {
            n,
            mean_re: self.shift.re + self.sum_re / n,
            m2_re: (self.sq_re - self.sum_re * self.sum_re / n).max(0.0),
            mean_im: self.shift.im + self.sum_im / n,
            m2_im: (self.sq_im - self.sum_im * self.sum_im / n).max(0.0),
        }
    }
}

/// Core driver: `draw` fills `outputs` values for one sample using the chunk's generator.
pub fn mc_batch<F>(samples: u64, seed: u64, outputs: usize, draw: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&mut ChaCha8Rng, &mut [Complex64]) + Sync,
{
    if samples < MIN_SAMPLES {
        return Err(Error::param(format!("at least {MIN_SAMPLES} samples are required, got {samples}")));
    }
    let chunks = samples.div_ceil(CHUNK);
    let mut total = vec![Moments::default(); outputs];
    let mut start = 0;
    while start < chunks {
        let end = (start + BATCH).min(chunks);
        let batch: Vec<Vec<Moments>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c);
                let count = CHUNK.min(samples - c * CHUNK);
                let mut sums = vec![ShiftedSums::default(); outputs];
                let mut buf = vec![Complex64::new(0.0, 0.0); outputs];
                for i in 0..count {
                    draw(&mut rng, &mut buf);
                    for (s, &v) in sums.iter_mut().zip(&buf) {
                        if i == 0 {
                            s.shift = v;
                        }
                        let d = v - s.shift;
                        s.sum_re += d.re;
                        s.sum_im += d.im;
                        s.sq_re += d.re * d.re;
                        s.sq_im += d.im * d.im;
                    }
                }
                sums.iter().map(|s| s.moments(count as f64)).collect()
            })
            .collect();
        for chunk in &batch {
            for (t, m) in total.iter_mut().zip(chunk) {
                t.merge(m);
            }
        }
        start = end;
    }
    let n = samples as f64;
    Ok(total
        .iter()
        .map(|m| {
            let var = (m.m2_re + m.m2_im) / (n - 1.0);
            McEstimate {
                mean: Complex64::new(m.mean_re, m.mean_im),
                std_error: (var / n).sqrt(),
                samples,
                seed,
            }
        })
        .collect())
}

/// One draw from `lambda_n`: real and imaginary parts independent `N(0, 1/2)`.
pub fn draw_gaussian(rng: &mut ChaCha8Rng, z: &mut [Complex64]) {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for zj in z.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *zj = Complex64::new(re * scale, im * scale);
    }
}

/// Several integrals against `lambda_n` from one shared sample stream.
pub fn gaussian_mc_many<F>(n: usize, samples: u64, seed: u64, outputs: usize, f: F) -> Result<Vec<McEstimate>>
where
    F: Fn(&[Complex64], &mut [Complex64]) + Sync,
{
    if n == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    mc_batch(samples, seed, outputs, |rng, out| {
        let mut z = [Complex64::new(0.0, 0.0); 16];
        if n <= 16 {
            draw_gaussian(rng, &mut z[..n]);
            f(&z[..n], out);
        } else {
            let mut z = vec![Complex64::new(0.0, 0.0); n];
            draw_gaussian(rng, &mut z);
            f(&z, out);
        }
    })
}

/// `int f d lambda_n`.
pub fn gaussian_mc<F>(f: F, n: usize, samples: u64, seed: u64) -> Result<McEstimate>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    Ok(gaussian_mc_many(n, samples, seed, 1, |z, out| out[0] = f(z))?[0])
}

/// `E[a(sqrt R_1, ..., sqrt R_k)]` by sampling `R_j ~ Gamma(shape_j, 1)` directly.
pub fn gamma_mc(a: &QuasiRadialSymbol, shape: &[f64], samples: u64, seed: u64) -> Result<McEstimate> {
    if shape.len() != a.arity() {
        return Err(Error::arity(a.arity(), shape.len()));
    }
    let dists = shape
        .iter()
        .map(|&c| Gamma::new(c, 1.0).map_err(|e| Error::param(format!("gamma shape {c}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let expr = a.expr();
    Ok(mc_batch(samples, seed, 1, |rng, out| {
        let mut s = [0.0f64; 16];
        let s = &mut s[..dists.len().min(16)];
        let mut big;
        let s: &mut [f64] = if dists.len() <= 16 {
            s
        } else {
            big = vec![0.0; dists.len()];
            &mut big
        };
        for (x, d) in s.iter_mut().zip(&dists) {
            *x = d.sample(rng).sqrt();
        }
        out[0] = expr.eval(s);
    })?[0])
}

/// Uniform draw in `[0, 1)` from a chunk generator, for callers composing their own samplers.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_error() {
        let e = gaussian_mc(|_| Complex64::new(1.0, 0.0), 3, 10_000, 1).unwrap();
        assert_eq!(e.mean, Complex64::new(1.0, 0.0));
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn second_moment_is_one() {
        let e = gaussian_mc(|z| Complex64::new(z[0].norm_sqr(), 0.0), 1, 1_000_000, 11).unwrap();
        assert!((e.mean.re - 1.0).abs() <= 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn first_moment_is_zero() {
        let e = gaussian_mc(|z| z[0], 2, 200_000, 5).unwrap();
        assert!(e.mean.norm() <= 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn too_few_samples() {
        assert!(gaussian_mc(|z| z[0], 1, 999, 0).is_err());
    }

    #[test]
    fn independent_of_thread_count() {
        let f = |z: &[Complex64]| z[0] * z[1].conj() + z[0].norm_sqr();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| gaussian_mc(f, 2, 300_001, 99).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(3));
        assert_eq!(a, run(8));
    }

    #[test]
    fn gamma_sampler_matches_mean() {
        let a = crate::symbol::parse_symbol(r#"{"kind":"power","coord":0,"exponent":2,"cap":1e9}"#).unwrap();
        let e = gamma_mc(&a, &[3.5], 400_000, 3).unwrap();
        assert!((e.mean.re - 3.5).abs() <= 4.0 * e.std_error);
    }
}
