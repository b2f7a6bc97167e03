use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Fully symmetric `n×n×n` tensor stored once per sorted index triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    n: usize,
    data: Vec<f64>,
}

fn sorted(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let (mut a, mut b, mut c) = (i, j, k);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    if b > c {
        std::mem::swap(&mut b, &mut c);
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    (a, b, c)
}

impl SymTensor3 {
    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("tensor dimension {n} < 2")));
        }
        Ok(Self { n, data: vec![0.0; n * (n + 1) * (n + 2) / 6] })
    }

    /// Independent standard normal value per stored entry.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut t = Self::zeros(n)?;
        for v in &mut t.data {
            *v = rng.sample(StandardNormal);
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Position of the sorted triple `a ≤ b ≤ c` in storage.
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        assert!(i < self.n && j < self.n && k < self.n, "tensor index out of range");
        let (a, b, c) = sorted(i, j, k);
        // Triples with first index < a, then pairs (b', c') with a ≤ b' < b, then c.
        let n = self.n;
        let tri = |m: usize| m * (m + 1) * (m + 2) / 6;
        let before_a = tri(n) - tri(n - a);
        let pairs = |m: usize| m * (m + 1) / 2;
        let rem = n - a;
        let before_b = pairs(rem) - pairs(n - b);
        before_a + before_b + (c - b)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Number of index orderings sharing one stored entry.
    pub fn multiplicity(i: usize, j: usize, k: usize) -> f64 {
        if i == j && j == k {
            1.0
        } else if i == j || j == k || i == k {
            3.0
        } else {
            6.0
        }
    }

    /// Visits each stored entry once as `(i ≤ j ≤ k, value)`.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, usize, f64)) {
        for i in 0..self.n {
            for j in i..self.n {
                for k in j..self.n {
                    f(i, j, k, self.get(i, j, k));
                }
            }
        }
    }

    /// `Σ_{ijk} c_ijk²` over all orderings.
    pub fn frobenius_sq(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_entry(|i, j, k, v| s += Self::multiplicity(i, j, k) * v * v);
        s
    }

    /// `Σ_k c_kki`, the derivative of the trace in direction `i`.
    pub fn trace_gradient(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|k| self.get(k, k, i)).sum()).collect()
    }

    /// The slice `t_i = (c_11i, …, c_nni)`.
    pub fn diagonal_slice(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.get(k, k, i)).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| alpha * v).collect() }
    }
}
