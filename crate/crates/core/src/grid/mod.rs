//! Uniform lattices on centered cubes `[-R, R]ⁿ`, difference stencils, the
//! `S2GRID v1` text format and a local degree-5 interpolant.

mod interp;
mod io;

pub use interp::{Interpolant, LocalJet};
pub use io::{parse_s2grid, read_s2grid, to_s2grid, write_s2grid};

use crate::error::{Error, Result};
use crate::sym::SymmetricMatrix;

/// Scalar field on `mⁿ` nodes of `[-R, R]ⁿ`, row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    n: usize,
    m: usize,
    extent: f64,
    values: Vec<f64>,
}

impl PotentialGrid {
    pub fn new(n: usize, m: usize, extent: f64, values: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::Domain(format!("grid dimension {n} not in {{2, 3}}")));
        }
        if m < 5 {
            return Err(Error::Domain(format!("{m} nodes per axis, need at least 5")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Domain(format!("half-width {extent} must be positive")));
        }
        if values.len() != m.pow(n as u32) {
            return Err(Error::Domain(format!("{} values for a {m}^{n} grid", values.len())));
        }
        Ok(Self { n, m, extent, values })
    }

    pub fn from_fn(n: usize, m: usize, extent: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut g = Self::new(n, m, extent, vec![0.0; m.pow(n as u32)])?;
        for idx in 0..g.len() {
            let x = g.point(idx);
            g.values[idx] = f(&x);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn h(&self) -> f64 {
        2.0 * self.extent / (self.m - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same lattice, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.m, self.extent, values)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.h()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.n - 1 - axis) as u32)
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.n).map(|a| (idx / self.stride(a)) % self.m).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().enumerate().map(|(a, &i)| i * self.stride(a)).sum()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).into_iter().map(|i| self.coord(i)).collect()
    }

    /// Nodes at least `layers` steps from every face.
    pub fn is_inner(&self, idx: usize, layers: usize) -> bool {
        self.multi_index(idx).iter().all(|&i| i >= layers && i + layers < self.m)
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.is_inner(idx, 1)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_interior(i)).collect()
    }

    /// Centered second differences, four-point cross for mixed entries.
    pub fn hessian_of(&self, values: &[f64], idx: usize) -> SymmetricMatrix {
        debug_assert!(self.is_interior(idx));
        let h2 = self.h() * self.h();
        let mut out = SymmetricMatrix::zeros(self.n).expect("n >= 2");
        for k in 0..self.n {
            let sk = self.stride(k);
            out.set(k, k, (values[idx + sk] - 2.0 * values[idx] + values[idx - sk]) / h2);
            for l in k + 1..self.n {
                let sl = self.stride(l);
                let v = values[idx + sk + sl] - values[idx + sk - sl] - values[idx - sk + sl] + values[idx - sk - sl];
                out.set(k, l, v / (4.0 * h2));
            }
        }
        out
    }

    pub fn hessian(&self, idx: usize) -> SymmetricMatrix {
        self.hessian_of(&self.values, idx)
    }

    pub fn interpolant(&self) -> Interpolant<'_> {
        Interpolant::new(self)
    }

    pub fn max_abs_diff(&self, other: &PotentialGrid) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
