use super::{Matrix, Spectrum, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::tolerances::{EIGEN_MAX_DIM, EIGEN_MAX_SWEEPS};

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as the columns of `vectors`, so `M = V diag(λ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub spectrum: Spectrum,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn values(&self) -> &[f64] {
        self.spectrum.values()
    }

    /// `V diag(d) Vᵀ` for replacement eigenvalues `d`.
    pub fn reassemble(&self, d: &[f64]) -> Result<SymmetricMatrix> {
        let n = self.vectors.rows();
        SymmetricMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| self.vectors.get(i, k) * d[k] * self.vectors.get(j, k)).sum()
        })
    }
}

/// Cyclic Jacobi diagonalization.
///
/// Sweeps over all `(p, q)` pairs, annihilating each off-diagonal entry with
/// a plane rotation until the off-diagonal mass is at rounding level. The
/// method is slow for large matrices but unconditionally stable and
/// deterministic, which is what the verification suites need.
pub fn eigen_sym(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    if n > EIGEN_MAX_DIM {
        return Err(Error::Domain(format!("eigen_sym supports dim <= {EIGEN_MAX_DIM}, got {n}")));
    }
    let mut a = m.to_dense();
    let mut v = Matrix::identity(n);
    let mut converged = false;
    for _ in 0..EIGEN_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a.get(p, q) * a.get(p, q))
            .sum();
        if off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {EIGEN_MAX_SWEEPS} sweeps (dim {n})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok(EigenDecomposition { spectrum: Spectrum::new(values)?, vectors })
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let g = 100.0 * apq.abs();
    if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        // Below rounding of both diagonal entries.
        a.set(p, q, 0.0);
        a.set(q, p, 0.0);
        return;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();

    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}
