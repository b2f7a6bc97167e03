//! The operator `F(M) = σ₂(eig M) = ½[(tr M)² - |M|²]`, its two branches on
//! the level set `F = 1`, and the linearization `Δ_F = Σ F_ij ∂_ij` with
//! `(F_ij) = (tr M) I - M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sym::{eigen_sym, esp, Matrix, Spectrum, SymmetricMatrix};
use crate::tolerances::{OPERATOR_POINT, SYMMETRIC_IDENTITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    PositiveTrace,
    NegativeTrace,
}

impl Branch {
    pub fn of_trace(trace: f64) -> Self {
        if trace > 0.0 {
            Branch::PositiveTrace
        } else {
            Branch::NegativeTrace
        }
    }
}

/// A Hessian on the level set `σ₂ = 1`, with its spectrum and eigenbasis.
#[derive(Debug, Clone)]
pub struct OperatorPoint {
    hessian: SymmetricMatrix,
    spectrum: Spectrum,
    basis: Matrix,
    branch: Branch,
}

impl OperatorPoint {
    pub fn new(hessian: SymmetricMatrix) -> Result<Self> {
        Self::with_tolerance(hessian, OPERATOR_POINT)
    }

    /// `tol` bounds `|σ₂ - 1| / max(1, σ₂(|λ|))`.
    pub fn with_tolerance(hessian: SymmetricMatrix, tol: f64) -> Result<Self> {
        let eig = eigen_sym(&hessian)?;
        let spectrum = eig.spectrum;
        let defect = spectrum.constraint_defect();
        if defect > tol {
            return Err(Error::Precondition(format!(
                "sigma_2 = {} is off the level set (relative defect {defect:e} > {tol:e})",
                esp(spectrum.values(), 2)
            )));
        }
        let branch = Branch::of_trace(spectrum.trace());
        Ok(Self { hessian, spectrum, basis: eig.vectors, branch })
    }

    /// Diagonal Hessian with the given eigenvalues.
    pub fn from_spectrum(spectrum: &Spectrum) -> Result<Self> {
        Self::new(SymmetricMatrix::diagonal(spectrum.values())?)
    }

    pub fn hessian(&self) -> &SymmetricMatrix {
        &self.hessian
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Columns are eigenvectors matching `spectrum()` in order.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    /// `f_i = σ₁ - λ_i`, the eigenvalues of the linearization.
    pub fn f_values(&self) -> Vec<f64> {
        let s1 = self.spectrum.trace();
        self.spectrum.values().iter().map(|l| s1 - l).collect()
    }

    fn require_positive(&self) -> Result<()> {
        match self.branch {
            Branch::PositiveTrace => Ok(()),
            Branch::NegativeTrace => Err(Error::Branch { trace: self.spectrum.trace() }),
        }
    }
}

/// `½[(tr M)² - |M|²_F]`.
pub fn evaluate_f(m: &SymmetricMatrix) -> f64 {
    let tr = m.trace();
    0.5 * (tr * tr - m.frobenius_sq())
}

/// [`evaluate_f`] cross-checked against `σ₂` of the eigenvalues.
pub fn evaluate_f_checked(m: &SymmetricMatrix) -> Result<f64> {
    let by_trace = evaluate_f(m);
    let eig = eigen_sym(m)?;
    let by_eigen = esp(eig.values(), 2);
    let scale = eig.spectrum.sigma2_scale().max(1.0);
    if (by_trace - by_eigen).abs() > SYMMETRIC_IDENTITY * scale {
        return Err(Error::Numerical(format!(
            "trace formula {by_trace} disagrees with eigenvalue formula {by_eigen}"
        )));
    }
    Ok(by_trace)
}

/// `(F_ij) = (tr M) I - M`, positive definite on the positive branch.
pub fn linearization(p: &OperatorPoint) -> Result<SymmetricMatrix> {
    p.require_positive()?;
    let f = p.f_values();
    if let Some((index, &value)) = f
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, v)| **v <= 0.0)
    {
        return Err(Error::Ellipticity { index, value });
    }
    let tr = p.hessian.trace();
    let mut out = p.hessian.scale(-1.0);
    for i in 0..p.dim() {
        out.set(i, i, out.get(i, i) + tr);
    }
    Ok(out)
}

/// `|∇_F v|² = Σ F_ij g_i g_j` for a gradient `g`.
pub fn grad_f_square(p: &OperatorPoint, g: &[f64]) -> Result<f64> {
    if g.len() != p.dim() {
        return Err(Error::Domain(format!("gradient has {} entries, expected {}", g.len(), p.dim())));
    }
    linearization(p)?.quad_form(g)
}

/// `Σ F_ij H_ij` for the Hessian `H` of a test quantity.
pub fn apply_lap_f(p: &OperatorPoint, h: &SymmetricMatrix) -> Result<f64> {
    if h.dim() != p.dim() {
        return Err(Error::Domain(format!("Hessian has dim {}, expected {}", h.dim(), p.dim())));
    }
    linearization(p)?.frobenius_dot(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::EXACT_IDENTITY;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn positive_branch_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let rest: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-2.0..6.0)).collect();
            let s1: f64 = rest.iter().sum();
            if s1 <= 1e-3 {
                continue;
            }
            let l1 = (1.0 - esp(&rest, 2)) / s1;
            let mut v = vec![l1];
            v.extend(rest);
            if v.iter().sum::<f64>() > 0.0 {
                return v;
            }
        }
    }

    fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let m = SymmetricMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        eigen_sym(&m).unwrap().vectors
    }

    fn rotated(values: &[f64], q: &Matrix) -> SymmetricMatrix {
        SymmetricMatrix::diagonal(values).unwrap().congruence(&q.transpose()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        for n in 2..6 {
            let v = evaluate_f(&SymmetricMatrix::identity(n).unwrap());
            assert_eq!(v, (n * (n - 1)) as f64 / 2.0);
        }
        let t = 3f64.powf(-0.5);
        let v = evaluate_f(&SymmetricMatrix::diagonal(&[t, t, t]).unwrap());
        assert!((v - 1.0).abs() < EXACT_IDENTITY);
    }

    #[test]
    fn evaluate_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..7 {
            let m = SymmetricMatrix::from_fn(n, |_, _| rng.random_range(-3.0..3.0)).unwrap();
            let by_eigen = esp(eigen_sym(&m).unwrap().values(), 2);
            let checked = evaluate_f_checked(&m).unwrap();
            assert!((checked - by_eigen).abs() <= 1e-10 * (1.0 + by_eigen.abs()));
        }
    }

    #[test]
    fn linearization_examples() {
        let t = 3f64.powf(-0.5);
        let p = OperatorPoint::from_spectrum(&Spectrum::new(vec![t, t, t]).unwrap()).unwrap();
        let f = linearization(&p).unwrap();
        for i in 0..3 {
            assert!((f.get(i, i) - 2.0 / 3f64.sqrt()).abs() < EXACT_IDENTITY);
        }
        let p = OperatorPoint::from_spectrum(&Spectrum::new(vec![2.0, 2.0, -0.75]).unwrap()).unwrap();
        let f = linearization(&p).unwrap();
        let s1 = 13.0 / 4.0;
        assert!((f.get(0, 0) - (s1 - 2.0)).abs() < EXACT_IDENTITY);
        assert!((f.get(1, 1) - (s1 - 2.0)).abs() < EXACT_IDENTITY);
        assert!((f.get(2, 2) - (s1 + 0.75)).abs() < EXACT_IDENTITY);
        assert_eq!(f.get(0, 1), 0.0);
    }

    #[test]
    fn linearization_spectrum_on_rotated_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 2..7 {
            let v = positive_branch_spectrum(n, &mut rng);
            let q = random_rotation(n, &mut rng);
            let p = OperatorPoint::new(rotated(&v, &q)).unwrap();
            assert_eq!(p.branch(), Branch::PositiveTrace);
            let s1: f64 = v.iter().sum();
            assert!((s1 - (2.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt()).abs() < 1e-9 * s1);
            let mut expect: Vec<f64> = v.iter().map(|l| s1 - l).collect();
            expect.sort_by(f64::total_cmp);
            let got = eigen_sym(&linearization(&p).unwrap()).unwrap();
            assert!(got.values()[0] > 0.0);
            for (a, b) in got.values().iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn negative_branch_is_refused() {
        let v: Vec<f64> = [2.0, 2.0, -0.75].iter().map(|x| -x).collect();
        let p = OperatorPoint::from_spectrum(&Spectrum::new(v).unwrap()).unwrap();
        assert_eq!(p.branch(), Branch::NegativeTrace);
        assert!(matches!(linearization(&p), Err(Error::Branch { .. })));
        assert!(matches!(grad_f_square(&p, &[1.0, 0.0, 0.0]), Err(Error::Branch { .. })));
    }

    #[test]
    fn off_level_set_rejected() {
        let m = SymmetricMatrix::identity(3).unwrap();
        assert!(matches!(OperatorPoint::new(m), Err(Error::Precondition(_))));
    }

    #[test]
    fn gradient_square() {
        let t = 3f64.powf(-0.5);
        let p = OperatorPoint::from_spectrum(&Spectrum::new(vec![t, t, t]).unwrap()).unwrap();
        assert_eq!(grad_f_square(&p, &[0.0; 3]).unwrap(), 0.0);
        assert!((grad_f_square(&p, &[1.0, 0.0, 0.0]).unwrap() - 2.0 / 3f64.sqrt()).abs() < EXACT_IDENTITY);
        assert!(matches!(grad_f_square(&p, &[1.0, 0.0]), Err(Error::Domain(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 2..7 {
            let v = positive_branch_spectrum(n, &mut rng);
            let q = random_rotation(n, &mut rng);
            let p = OperatorPoint::new(rotated(&v, &q)).unwrap();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // In the eigenbasis the form is diagonal with entries f_i.
            let s1: f64 = v.iter().sum();
            let coords: Vec<f64> = (0..n).map(|k| (0..n).map(|i| q.get(i, k) * g[i]).sum()).collect();
            let diag: f64 = (0..n).map(|k| (s1 - v[k]) * coords[k] * coords[k]).sum();
            let direct = grad_f_square(&p, &g).unwrap();
            assert!(direct > 0.0);
            assert!((direct - diag).abs() <= 1e-12 * (1.0 + diag.abs()) * 10.0);
        }
    }

    #[test]
    fn lap_f_pairing() {
        let t = 3f64.powf(-0.5);
        let p = OperatorPoint::from_spectrum(&Spectrum::new(vec![t, t, t]).unwrap()).unwrap();
        assert_eq!(apply_lap_f(&p, &SymmetricMatrix::zeros(3).unwrap()).unwrap(), 0.0);
        let v = apply_lap_f(&p, &SymmetricMatrix::identity(3).unwrap()).unwrap();
        assert!((v - 2.0 * 3f64.sqrt()).abs() < EXACT_IDENTITY);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 2..7 {
            let v = positive_branch_spectrum(n, &mut rng);
            let q = random_rotation(n, &mut rng);
            let p = OperatorPoint::new(rotated(&v, &q)).unwrap();
            let h = SymmetricMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let s1: f64 = v.iter().sum();
            let h_eig = h.congruence(&q).unwrap();
            let by_eigen: f64 = (0..n).map(|k| (s1 - v[k]) * h_eig.get(k, k)).sum();
            let direct = apply_lap_f(&p, &h).unwrap();
            assert!((direct - by_eigen).abs() <= 1e-12 * (1.0 + s1 * n as f64) * 10.0);
        }
    }

    #[test]
    fn orthogonal_invariance_and_midpoint_concavity() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut worst = f64::INFINITY;
        for trial in 0..10_000 {
            let n = 2 + trial % 5;
            let a = rotated(&positive_branch_spectrum(n, &mut rng), &random_rotation(n, &mut rng));
            let b = rotated(&positive_branch_spectrum(n, &mut rng), &random_rotation(n, &mut rng));
            let q = random_rotation(n, &mut rng);
            let fa = evaluate_f(&a);
            let fq = evaluate_f(&a.congruence(&q).unwrap());
            assert!((fa - fq).abs() <= 1e-10 * (1.0 + a.frobenius_sq()));
            let mid = a.scale(0.5).scaled_add(0.5, &b).unwrap();
            let margin = evaluate_f(&mid) - fa.min(evaluate_f(&b));
            worst = worst.min(margin);
        }
        assert!(worst >= -1e-10, "midpoint concavity margin {worst}");
    }
}
