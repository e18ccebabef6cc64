//! Partitions `n = (n_1, ..., n_k)` and lattice multi-indices.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Block sizes of the group `U(n_1) x ... x U(n_k)` acting on `C^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::param("partition must have at least one part"));
        }
        if parts.iter().any(|&p| p == 0) {
            return Err(Error::param("partition parts must be positive"));
        }
        Ok(Self { parts })
    }

    /// The partition `1 = (1, ..., 1)` with `k` parts.
    pub fn ones(k: usize) -> Self {
        Self { parts: vec![1; k.max(1)] }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// Number of blocks `k`.
    pub fn k(&self) -> usize {
        self.parts.len()
    }

    /// Complex dimension `n = sum n_j`.
    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Offset of block `j` inside `C^n`.
    pub fn offset(&self, block: usize) -> usize {
        self.parts[..block].iter().sum()
    }

    /// Gamma shapes `m_j + n_j` governing the eigenvalue at `m`.
    pub fn shapes(&self, m: &MultiIndex) -> Result<Vec<f64>> {
        if m.len() != self.k() {
            return Err(Error::arity(self.k(), m.len()));
        }
        Ok(m.0.iter().zip(&self.parts).map(|(&mi, &ni)| (mi + ni) as f64).collect())
    }

    /// `n - 1`, the shift relating `gamma_n` to `gamma_1`.
    pub fn minus_one(&self) -> MultiIndex {
        MultiIndex(self.parts.iter().map(|p| p - 1).collect())
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.parts
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A point `m` of `N_0^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        if self.len() != other.len() {
            return Err(Error::arity(self.len(), other.len()));
        }
        Ok(MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    /// Componentwise `self - other`, or `None` when some entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.len() != other.len() {
            return None;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn sqrt(&self) -> Vec<f64> {
        self.0.iter().map(|&m| (m as f64).sqrt()).collect()
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The box `[0, M_1] x ... x [0, M_k]` of `N_0^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Window {
    bounds: Vec<usize>,
}

impl Window {
    pub fn new(bounds: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::param("window must have at least one axis"));
        }
        Ok(Self { bounds })
    }

    pub fn cube(k: usize, bound: usize) -> Self {
        Self { bounds: vec![bound; k.max(1)] }
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }

    pub fn k(&self) -> usize {
        self.bounds.len()
    }

    /// Number of lattice points, saturating on overflow.
    pub fn len(&self) -> usize {
        self.bounds
            .iter()
            .fold(1usize, |acc, &b| acc.saturating_mul(b.saturating_add(1)))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, m: &MultiIndex) -> bool {
        m.len() == self.k() && m.0.iter().zip(&self.bounds).all(|(a, b)| a <= b)
    }

    /// Window enlarged by `s` along every axis.
    pub fn enlarged(&self, s: &MultiIndex) -> Window {
        Window {
            bounds: self.bounds.iter().zip(&s.0).map(|(b, e)| b + e).collect(),
        }
    }

    /// Row-major position of `m` inside the window.
    pub fn linear_index(&self, m: &[usize]) -> usize {
        m.iter()
            .zip(&self.bounds)
            .fold(0usize, |acc, (&mi, &b)| acc * (b + 1) + mi)
    }

    /// Inverse of [`Window::linear_index`].
    pub fn point(&self, mut idx: usize) -> MultiIndex {
        let mut out = vec![0; self.k()];
        for d in (0..self.k()).rev() {
            let side = self.bounds[d] + 1;
            out[d] = idx % side;
            idx /= side;
        }
        MultiIndex(out)
    }

    /// All points in row-major order.
    pub fn points(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_rejects_zero_part() {
        assert!(Partition::new(vec![2, 0]).is_err());
        assert!(Partition::new(vec![]).is_err());
        let p = Partition::new(vec![2, 1]).unwrap();
        assert_eq!(p.total(), 3);
        assert_eq!(p.k(), 2);
        assert_eq!(p.offset(1), 2);
    }

    #[test]
    fn window_linear_index_round_trips() {
        let w = Window::new(vec![3, 4, 2]).unwrap();
        assert_eq!(w.len(), 4 * 5 * 3);
        for i in 0..w.len() {
            assert_eq!(w.linear_index(&w.point(i).0), i);
        }
    }

    #[test]
    fn checked_sub_refuses_negative() {
        let a = MultiIndex(vec![3, 1]);
        assert_eq!(a.checked_sub(&MultiIndex(vec![1, 1])), Some(MultiIndex(vec![2, 0])));
        assert_eq!(a.checked_sub(&MultiIndex(vec![0, 2])), None);
    }
}
