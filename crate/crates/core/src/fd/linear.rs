use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::LINEAR_SOLVE_REL;

/// Compressed sparse rows, assembled one row at a time.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new() }
    }

    /// Appends the next row; repeated columns are summed.
    pub fn push_row(&mut self, entries: &mut Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in entries.iter() {
            debug_assert!(c < self.n);
            if last == Some(c) {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.row_ptr.push(self.cols.len());
        entries.clear();
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[c] += v * x[r];
            }
        }
        out
    }

    /// Largest `|row - column|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c))).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearBackend {
    BandedLu,
    Cgnr,
}

/// Above this many multiply-adds the banded factorization is replaced by CGNR.
const BANDED_FLOP_BUDGET: f64 = 2e9;

pub fn choose_backend(n: usize, bandwidth: usize) -> LinearBackend {
    let flops = n as f64 * bandwidth as f64 * 2.0 * bandwidth as f64;
    if flops > BANDED_FLOP_BUDGET {
        LinearBackend::Cgnr
    } else {
        LinearBackend::BandedLu
    }
}

pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, LinearBackend)> {
    match choose_backend(a.dim(), a.bandwidth()) {
        LinearBackend::BandedLu => Ok((BandedLu::factor(a)?.solve(b), LinearBackend::BandedLu)),
        LinearBackend::Cgnr => Ok((cgnr(a, b, LINEAR_SOLVE_REL, 50 * a.dim() + 1000)?, LinearBackend::Cgnr)),
    }
}

/// LU with partial pivoting in band storage. Row `r` keeps columns
/// `r - b ..= r + 2b`, the extra `b` holding fill from row swaps.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    b: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn slot(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.b - r)
    }

    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.dim();
        let b = a.bandwidth();
        let width = 3 * b + 1;
        let mut lu = Self { n, b, width, data: vec![0.0; n * width], pivots: vec![0; n] };
        for r in 0..n {
            for (c, v) in a.row(r) {
                let s = lu.slot(r, c);
                lu.data[s] = v;
            }
        }
        for i in 0..n {
            let last_row = (i + b).min(n - 1);
            let last_col = (i + 2 * b).min(n - 1);
            let mut p = i;
            let mut best = lu.data[lu.slot(i, i)].abs();
            for r in i + 1..=last_row {
                let v = lu.data[lu.slot(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::Numerical(format!("singular banded system at column {i}")));
            }
            lu.pivots[i] = p;
            if p != i {
                for c in i..=last_col {
                    let (s1, s2) = (lu.slot(i, c), lu.slot(p, c));
                    lu.data.swap(s1, s2);
                }
            }
            let d = lu.data[lu.slot(i, i)];
            for r in i + 1..=last_row {
                let sr = lu.slot(r, i);
                let f = lu.data[sr] / d;
                if f == 0.0 {
                    continue;
                }
                lu.data[sr] = f;
                for c in i + 1..=last_col {
                    let v = lu.data[lu.slot(i, c)];
                    let s = lu.slot(r, c);
                    lu.data[s] -= f * v;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let mut x = rhs.to_vec();
        for i in 0..n {
            x.swap(i, self.pivots[i]);
            for r in i + 1..=(i + b).min(n - 1) {
                x[r] -= self.data[self.slot(r, i)] * x[i];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + 2 * b).min(n - 1) {
                s -= self.data[self.slot(i, c)] * x[c];
            }
            x[i] = s / self.data[self.slot(i, i)];
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients on `AᵀA x = Aᵀb`, preconditioned by `diag(AᵀA)`.
pub fn cgnr(a: &SparseMatrix, b: &[f64], rel: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut diag = vec![0.0; n];
    for r in 0..n {
        for (c, v) in a.row(r) {
            diag[c] += v * v;
        }
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut s = a.mul_transpose(&r);
    let mut z: Vec<f64> = s.iter().zip(&diag).map(|(v, d)| v / d).collect();
    let mut p = z.clone();
    let mut gamma = dot(&s, &z);
    for _ in 0..max_iter {
        let q = a.mul(&p);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        if dot(&r, &r).sqrt() <= rel * bnorm {
            return Ok(x);
        }
        s = a.mul_transpose(&r);
        z = s.iter().zip(&diag).map(|(v, d)| v / d).collect();
        let next = dot(&s, &z);
        let beta = next / gamma;
        gamma = next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let res = dot(&r, &r).sqrt() / bnorm;
    Err(Error::Numerical(format!("CGNR stopped at relative residual {res:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, b: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
        let mut a = SparseMatrix::new(n);
        let mut row = Vec::new();
        for r in 0..n {
            for c in r.saturating_sub(b)..=(r + b).min(n - 1) {
                if rng.random::<f64>() < 0.6 || c == r {
                    row.push((c, rng.random_range(-1.0..1.0)));
                }
            }
            a.push_row(&mut row);
        }
        a
    }

    fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn banded_lu_solves_random_nonsymmetric_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, b) in [(1, 0), (5, 1), (40, 3), (200, 12), (300, 299)] {
            let a = random_banded(n, b, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rhs = a.mul(&x);
            let got = BandedLu::factor(&a).unwrap().solve(&rhs);
            assert!(residual(&a, &got, &rhs) < 1e-9, "n={n} b={b}");
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = SparseMatrix::new(3);
        a.push_row(&mut vec![(1, 1.0)]);
        a.push_row(&mut vec![(0, 1.0), (2, 2.0)]);
        a.push_row(&mut vec![(1, 3.0), (2, 1.0)]);
        let x = BandedLu::factor(&a).unwrap().solve(&[2.0, 7.0, 9.0]);
        assert!(residual(&a, &x, &[2.0, 7.0, 9.0]) < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let mut a = SparseMatrix::new(2);
        a.push_row(&mut vec![(0, 1.0), (1, 1.0)]);
        a.push_row(&mut vec![(0, 1.0), (1, 1.0)]);
        assert!(BandedLu::factor(&a).is_err());
    }

    #[test]
    fn cgnr_agrees_with_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 150;
        let mut a = random_banded(n, 4, &mut rng);
        // Make it comfortably nonsingular.
        let mut b2 = SparseMatrix::new(n);
        let mut row = Vec::new();
        for r in 0..n {
            row.extend(a.row(r));
            row.push((r, 6.0));
            b2.push_row(&mut row);
        }
        a = b2;
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1 = BandedLu::factor(&a).unwrap().solve(&rhs);
        let x2 = cgnr(&a, &rhs, 1e-13, 10_000).unwrap();
        let diff = x1.iter().zip(&x2).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn backend_rule() {
        assert_eq!(choose_backend(127 * 127, 128), LinearBackend::BandedLu);
        assert_eq!(choose_backend(31usize.pow(3), 31 * 31 + 32), LinearBackend::Cgnr);
    }
}
