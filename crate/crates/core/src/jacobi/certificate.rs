use serde::{Deserialize, Serialize};

use super::sampler::{ConstraintSample, SamplerConfig, sample_with};
use super::tensor::SymTensor3;
use crate::error::{Error, Result};
use crate::sym::{eigen_sym, Matrix, SymmetricMatrix};
use crate::tolerances::{DF_DEGENERATE, DISCRIMINANT_SLACK, Q_TANGENCY_PRECONDITION, TANGENCY};

/// Third-order data at a point where the Hessian is diagonal.
#[derive(Debug, Clone)]
pub struct Jet {
    pub sample: ConstraintSample,
    pub c: SymTensor3,
}

impl Jet {
    /// Checks `Σ_i f_i c_iik = 0` for every `k`.
    pub fn new(sample: ConstraintSample, c: SymTensor3) -> Result<Self> {
        if c.dim() != sample.n() {
            return Err(Error::Domain(format!("tensor dim {} vs spectrum dim {}", c.dim(), sample.n())));
        }
        let worst = tangency_residual(&sample, &c);
        if worst > TANGENCY {
            return Err(Error::Precondition(format!("tangency residual {worst:e}")));
        }
        Ok(Self { sample, c })
    }
}

/// Largest relative violation of `Σ_i f_i c_iik = 0` over `k`.
pub fn tangency_residual(sample: &ConstraintSample, c: &SymTensor3) -> f64 {
    let f = sample.f();
    let n = f.len();
    (0..n)
        .map(|k| {
            let (mut s, mut scale) = (0.0, 0.0);
            for i in 0..n {
                let term = f[i] * c.get(i, i, k);
                s += term;
                scale += term.abs();
            }
            s.abs() / scale.max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Frobenius-nearest tangent tensor. Constraint `k` only involves the
/// stored entries `{i, i, k}`, and distinct constraints never share one, so
/// each constraint is a rank-one projection in the multiplicity-weighted
/// metric.
pub fn project_jet(sample: &ConstraintSample, raw: &SymTensor3) -> Result<Jet> {
    let n = sample.n();
    if raw.dim() != n {
        return Err(Error::Domain(format!("tensor dim {} vs spectrum dim {n}", raw.dim())));
    }
    let f = sample.f();
    let mut c = raw.clone();
    for k in 0..n {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let m = SymTensor3::multiplicity(i, i, k);
            num += f[i] * raw.get(i, i, k);
            den += f[i] * f[i] / m;
        }
        if den <= 0.0 {
            continue;
        }
        let lambda = num / den;
        for i in 0..n {
            let m = SymTensor3::multiplicity(i, i, k);
            c.set(i, i, k, raw.get(i, i, k) - lambda * f[i] / m);
        }
    }
    Jet::new(sample.clone(), c)
}

fn eta(sample: &ConstraintSample, i: usize) -> f64 {
    let s1 = sample.sigma1();
    1.0 + sample.delta * (s1 - sample.spectrum.values()[i]) / (s1 + sample.j)
}

/// `(Δ_F b - ε|∇_F b|²)` with `b = log(σ₁ + J)`, from the grouped third-order sums.
pub fn jacobi_excess(jet: &Jet) -> f64 {
    let c = &jet.c;
    let n = c.dim();
    let s = &jet.sample;
    let f = s.f();
    let shifted = s.sigma1() + s.j;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..i {
            for k in 0..j {
                sum += 6.0 * c.get(i, j, k).powi(2);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += 3.0 * c.get(j, j, i).powi(2);
            }
        }
        sum += c.get(i, i, i).powi(2);
    }
    let du = c.trace_gradient();
    for i in 0..n {
        sum -= (1.0 + s.delta * f[i] / shifted) * du[i] * du[i];
    }
    sum / shifted
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcessDecomposition {
    /// `6 Σ_{i>j>k} c_ijk²`.
    pub distinct: f64,
    /// `Q_i(t_i)` for each slice.
    pub q_terms: Vec<f64>,
}

impl ExcessDecomposition {
    pub fn total(&self) -> f64 {
        self.distinct + self.q_terms.iter().sum::<f64>()
    }
}

/// Splits `(σ₁ + J)·excess` into the distinct-index sum and one `Q_i` per slice.
pub fn excess_decomposition(jet: &Jet) -> Result<ExcessDecomposition> {
    let c = &jet.c;
    let n = c.dim();
    let mut distinct = 0.0;
    c.for_each_entry(|i, j, k, v| {
        if i < j && j < k {
            distinct += 6.0 * v * v;
        }
    });
    let q_terms = (0..n)
        .map(|i| q_form_direct(&jet.sample, i, &c.diagonal_slice(i)))
        .collect::<Result<_>>()?;
    Ok(ExcessDecomposition { distinct, q_terms })
}

/// `Q = 3|t|² - 2 t_i² - η (Σ t)²` for a tangent `t`.
pub fn q_form_direct(sample: &ConstraintSample, i: usize, t: &[f64]) -> Result<f64> {
    let n = sample.n();
    if t.len() != n || i >= n {
        return Err(Error::Domain(format!("slice length {} / index {i} for n = {n}", t.len())));
    }
    let f = sample.f();
    let df = sample.df_norm_sq().sqrt();
    let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = f.iter().zip(t).map(|(a, b)| a * b).sum();
    if dot.abs() > Q_TANGENCY_PRECONDITION * df * tn {
        return Err(Error::Precondition(format!("slice not tangent: <Df, t> = {dot:e}")));
    }
    let sum: f64 = t.iter().sum();
    Ok(3.0 * tn * tn - 2.0 * t[i] * t[i] - eta(sample, i) * sum * sum)
}

/// Restriction of `Q` to `span{E, L}` inside the tangent space `Df^⊥`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QReduction {
    pub i: usize,
    pub e: Vec<f64>,
    pub l: Vec<f64>,
    pub norm_e2: f64,
    pub norm_l2: f64,
    pub e_dot_l: f64,
    pub eta: f64,
    pub tr: f64,
    pub det: f64,
    /// Eigenvalues `ξ₋ ≤ ξ₊`.
    pub xi: [f64; 2],
}

impl QReduction {
    pub fn xi_min(&self) -> f64 {
        self.xi[0]
    }
}

fn check_index(sample: &ConstraintSample, i: usize) -> Result<()> {
    if i >= sample.n() {
        return Err(Error::Domain(format!("index {i} out of range for n = {}", sample.n())));
    }
    Ok(())
}

pub fn q_reduction_eigen(sample: &ConstraintSample, i: usize) -> Result<QReduction> {
    check_index(sample, i)?;
    let n = sample.n();
    let f = sample.f();
    let df2 = sample.df_norm_sq();
    if df2 <= DF_DEGENERATE {
        return Err(Error::Singularity { order: 1, value: df2 });
    }
    let s1 = sample.sigma1();
    let e: Vec<f64> = (0..n).map(|k| if k == i { 1.0 } else { 0.0 } - f[i] / df2 * f[k]).collect();
    let l: Vec<f64> = (0..n).map(|k| 1.0 - (n as f64 - 1.0) * s1 / df2 * f[k]).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let norm_e2 = dot(&e, &e);
    let norm_l2 = dot(&l, &l);
    let e_dot_l = dot(&e, &l);
    let eta = eta(sample, i);
    let tr = 6.0 - 2.0 * norm_e2 - eta * norm_l2;
    let det = 9.0 - 6.0 * norm_e2 - 3.0 * eta * norm_l2 + 2.0 * eta * (norm_e2 * norm_l2 - e_dot_l * e_dot_l);
    let disc = tr * tr - 4.0 * det;
    if disc < -DISCRIMINANT_SLACK * (1.0 + tr * tr) {
        return Err(Error::Numerical(format!("complex eigenvalues: tr^2 - 4 det = {disc:e}")));
    }
    let root = disc.max(0.0).sqrt();
    Ok(QReduction { i, e, l, norm_e2, norm_l2, e_dot_l, eta, tr, det, xi: [0.5 * (tr - root), 0.5 * (tr + root)] })
}

/// `Q` compressed to an orthonormal basis of `Df^⊥`, computed with a full eigensolve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectedForm {
    pub eigenvalues: Vec<f64>,
    /// `tr` after removing the `n - 3` eigenvalues equal to 3 off `span{E, L}`.
    pub tr: f64,
    pub det: f64,
}

impl ProjectedForm {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Orthonormal basis of `v^⊥` from a Householder reflection, as columns.
fn complement_basis(v: &[f64]) -> Matrix {
    let n = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut w: Vec<f64> = v.iter().map(|x| x / norm).collect();
    w[0] += if w[0] >= 0.0 { 1.0 } else { -1.0 };
    let wn2: f64 = w.iter().map(|x| x * x).sum();
    Matrix::from_fn(n, n - 1, |r, c| {
        let col = c + 1;
        let id = if r == col { 1.0 } else { 0.0 };
        id - 2.0 * w[r] * w[col] / wn2
    })
}

pub fn projected_form(sample: &ConstraintSample, i: usize) -> Result<ProjectedForm> {
    check_index(sample, i)?;
    let n = sample.n();
    let eta = eta(sample, i);
    let q = Matrix::from_fn(n, n, |r, c| {
        let id = if r == c { 3.0 } else { 0.0 };
        let ei = if r == i && c == i { 2.0 } else { 0.0 };
        id - ei - eta
    });
    let v = complement_basis(&sample.f());
    let b = v.transpose().matmul(&q).matmul(&v);
    let eigenvalues = if n == 2 {
        vec![b.get(0, 0)]
    } else {
        eigen_sym(&SymmetricMatrix::from_dense(&b)?)?.values().to_vec()
    };
    let extra = n as i32 - 3;
    let tr = eigenvalues.iter().sum::<f64>() - 3.0 * extra as f64;
    let det = eigenvalues.iter().product::<f64>() / 3f64.powi(extra);
    Ok(ProjectedForm { eigenvalues, tr, det })
}

/// `(lhs, rhs)` of the lower bound `det·(σ₁+J)|Df|²/f_i ≥ rhs` at `δ = 4/3`.
pub fn det_lower_bound(sample: &ConstraintSample, i: usize) -> Result<(f64, f64)> {
    check_index(sample, i)?;
    if sample.delta != 4.0 / 3.0 {
        return Err(Error::Precondition(format!("delta = {} is not 4/3", sample.delta)));
    }
    let f = sample.f();
    if f[i] <= 0.0 {
        return Err(Error::Ellipticity { index: i, value: f[i] });
    }
    let red = q_reduction_eigen(sample, i)?;
    let n = sample.n() as f64;
    let s1 = sample.sigma1();
    let j = sample.j;
    let li = sample.spectrum.values()[i];
    let lhs = red.det * (s1 + j) * sample.df_norm_sq() / f[i];
    let rhs = 8.0
        + 2.0 * (n + 1.0) * j * s1
        + 2.0 * (n - 3.0) * j * li
        + 2.0 * (n + 1.0) / 3.0 * s1 * f[i]
        + 8.0 / 3.0 * n * li * f[i];
    Ok((lhs, rhs))
}

/// `Δ_F (σ₁+J)^{-1/3}`, from the separate gradient and Laplacian of `b`.
pub fn superharmonic_form(jet: &Jet) -> Result<f64> {
    let s = &jet.sample;
    if s.epsilon != 1.0 / 3.0 {
        return Err(Error::Precondition(format!("epsilon = {} is not 1/3", s.epsilon)));
    }
    let f = s.f();
    let shifted = s.sigma1() + s.j;
    let du = jet.c.trace_gradient();
    let grad_sq: f64 = (0..f.len()).map(|k| f[k] * du[k] * du[k]).sum::<f64>() / (shifted * shifted);
    // Twice-differentiated equation: Δ_F Δu = Σ c² - Σ_k (Δu_k)².
    let lap_trace = jet.c.frobenius_sq() - du.iter().map(|x| x * x).sum::<f64>();
    let lap_b = lap_trace / shifted - grad_sq;
    Ok(-(1.0 / 3.0) * shifted.powf(-1.0 / 3.0) * (lap_b - grad_sq / 3.0))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Remark3d {
    pub lambda3: f64,
    pub ratio: f64,
    pub am_gm_bound: f64,
}

/// Third eigenvalue on `σ₂ = 1` and the ratio `σ₁/(-λ₃)` for `λ₁λ₂ > 1`.
pub fn remark_3d(lambda1: f64, lambda2: f64) -> Result<Remark3d> {
    if !(lambda1 >= lambda2 && lambda2 > 0.0) {
        return Err(Error::Precondition(format!("need l1 >= l2 > 0, got ({lambda1}, {lambda2})")));
    }
    let p = lambda1 * lambda2;
    if p <= 1.0 {
        return Err(Error::Precondition(format!("l1*l2 = {p} <= 1 leaves l3 non-negative")));
    }
    let s = lambda1 + lambda2;
    Ok(Remark3d {
        lambda3: (1.0 - p) / s,
        ratio: -1.0 + s * s / (p - 1.0),
        am_gm_bound: -1.0 + 4.0 * p / (p - 1.0),
    })
}

/// Smallest `J ≥ 0` making `det > 0` for slice `i` (`∞` if none does).
pub fn minimal_shift(sample: &ConstraintSample, i: usize) -> Result<f64> {
    let red = q_reduction_eigen(sample, i)?;
    let a = 9.0 - 6.0 * red.norm_e2;
    let b = 2.0 * (red.norm_e2 * red.norm_l2 - red.e_dot_l * red.e_dot_l) - 3.0 * red.norm_l2;
    let s1 = sample.sigma1();
    let fi = s1 - sample.spectrum.values()[i];
    let eta0 = 1.0 + sample.delta * fi / s1;
    if b >= 0.0 {
        return Ok(0.0);
    }
    let eta_star = -a / b;
    if eta0 < eta_star {
        Ok(0.0)
    } else if eta_star <= 1.0 {
        Ok(f64::INFINITY)
    } else {
        Ok((sample.delta * fi / (eta_star - 1.0) - s1).max(0.0))
    }
}

/// Largest [`minimal_shift`] over all slices.
pub fn minimal_shift_sample(sample: &ConstraintSample) -> Result<f64> {
    (0..sample.n()).try_fold(0.0, |acc: f64, i| Ok(acc.max(minimal_shift(sample, i)?)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftProbe {
    pub n: usize,
    pub k: f64,
    pub samples: usize,
    pub violations: usize,
    pub worst_det: f64,
    pub witness: Option<(Vec<f64>, usize)>,
}

/// Looks for `det ≤ 0` at `J = 0`; any hit shows the shift is needed.
pub fn shift_necessity_probe(n: usize, k: f64, count: usize, seed: u64) -> Result<ShiftProbe> {
    let mut config = SamplerConfig::new(n, k);
    config.j = Some(0.0);
    config.pin_probability = 0.75;
    let samples = sample_with(&config, count, seed)?;
    let mut probe = ShiftProbe { n, k, samples: samples.len(), violations: 0, worst_det: f64::INFINITY, witness: None };
    for s in &samples {
        let mut hit = false;
        for i in 0..n {
            let det = q_reduction_eigen(s, i)?.det;
            if det < probe.worst_det {
                probe.worst_det = det;
                probe.witness = Some((s.spectrum.values().to_vec(), i));
            }
            hit |= det <= 0.0;
        }
        probe.violations += hit as usize;
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::sampler::{default_shift, sample_constraint, CHUNK_SIZE};
    use crate::sym::Spectrum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn remark_sample(k: f64) -> ConstraintSample {
        ConstraintSample::with_defaults(Spectrum::new(vec![2.0, 2.0, -0.75]).unwrap(), k).unwrap()
    }

    fn symmetric_sample(j: f64) -> ConstraintSample {
        let t = 3f64.powf(-0.5);
        ConstraintSample::new(Spectrum::new(vec![t, t, t]).unwrap(), 1.0, j, 1.0 / 3.0).unwrap()
    }

    /// Random tangent slice for index `i` by Gram-Schmidt against `Df`.
    fn tangent(sample: &ConstraintSample, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let f = sample.f();
        let mut t: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = t.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / sample.df_norm_sq();
        for (x, fi) in t.iter_mut().zip(&f) {
            *x -= c * fi;
        }
        t
    }

    #[test]
    fn projection_is_idempotent_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..7 {
            for s in sample_constraint(n, 5.0, 50, n as u64).unwrap() {
                let raw = SymTensor3::random(n, &mut rng).unwrap();
                let jet = project_jet(&s, &raw).unwrap();
                assert!(tangency_residual(&s, &jet.c) <= 1e-12);
                let again = project_jet(&s, &jet.c).unwrap();
                assert!(again.c.max_abs_diff(&jet.c) <= 1e-14 * (1.0 + jet.c.frobenius_sq().sqrt()));
            }
        }
    }

    #[test]
    fn projection_removes_aligned_violation() {
        let s = remark_sample(1.0);
        let f = s.f();
        let mut raw = SymTensor3::zeros(3).unwrap();
        for i in 0..3 {
            raw.set(i, i, 0, f[i]);
        }
        let jet = project_jet(&s, &raw).unwrap();
        let r: f64 = (0..3).map(|i| f[i] * jet.c.get(i, i, 0)).sum();
        assert!(r.abs() <= 1e-12);
    }

    #[test]
    fn projection_is_nearest_point() {
        // Any other tangent tensor is at least as far from raw in the full norm.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..6 {
            let s = &sample_constraint(n, 1.0, 1, 40 + n as u64).unwrap()[0];
            let raw = SymTensor3::random(n, &mut rng).unwrap();
            let best = project_jet(s, &raw).unwrap().c;
            let dist = |c: &SymTensor3| {
                let mut d = 0.0;
                c.for_each_entry(|i, j, k, v| d += SymTensor3::multiplicity(i, j, k) * (v - raw.get(i, j, k)).powi(2));
                d
            };
            for _ in 0..50 {
                let other = project_jet(s, &SymTensor3::random(n, &mut rng).unwrap()).unwrap().c;
                let mut probe = best.clone();
                best.for_each_entry(|i, j, k, v| probe.set(i, j, k, v + 0.1 * other.get(i, j, k)));
                assert!(dist(&probe) >= dist(&best) - 1e-12);
            }
        }
    }

    #[test]
    fn zero_jet() {
        let s = remark_sample(1.0);
        let jet = project_jet(&s, &SymTensor3::zeros(3).unwrap()).unwrap();
        assert_eq!(jacobi_excess(&jet), 0.0);
        assert_eq!(superharmonic_form(&jet).unwrap(), 0.0);
        assert_eq!(q_form_direct(&s, 0, &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn decomposition_and_superharmonic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..7 {
            for k in [1.0, 5.0, 10.0] {
                for s in sample_constraint(n, k, 200, 7).unwrap() {
                    let jet = project_jet(&s, &SymTensor3::random(n, &mut rng).unwrap()).unwrap();
                    let ex = jacobi_excess(&jet);
                    let shifted = s.sigma1() + s.j;
                    let dec = excess_decomposition(&jet).unwrap();
                    let scale = jet.c.frobenius_sq() * (2.0 + n as f64 * n as f64);
                    assert!((shifted * ex - dec.total()).abs() <= 1e-10 * scale.max(1.0));
                    let sh = superharmonic_form(&jet).unwrap();
                    let expect = -(1.0 / 3.0) * shifted.powf(-1.0 / 3.0) * ex;
                    assert!((sh - expect).abs() <= 1e-12 * (1.0 + scale / shifted));
                    assert!(ex >= -1e-9, "excess {ex} at {:?}", s.spectrum.values());
                    assert!(sh <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn q_form_on_complement_of_e_and_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 4..7 {
            let s = &sample_constraint(n, 5.0, 1, 3).unwrap()[0];
            for i in 0..n {
                let red = q_reduction_eigen(s, i).unwrap();
                let f = s.f();
                // Gram-Schmidt against Df, E, L.
                let mut basis: Vec<Vec<f64>> = Vec::new();
                for v in [f.clone(), red.e.clone(), red.l.clone()] {
                    let mut w = v;
                    for b in &basis {
                        let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                        for (x, y) in w.iter_mut().zip(b) {
                            *x -= c * y;
                        }
                    }
                    let nn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    basis.push(w.iter().map(|x| x / nn).collect());
                }
                let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                for b in &basis {
                    let c: f64 = t.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in t.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
                let t2: f64 = t.iter().map(|x| x * x).sum();
                let q = q_form_direct(s, i, &t).unwrap();
                assert!((q - 3.0 * t2).abs() <= 1e-12 * (1.0 + t2) * 10.0);
            }
        }
    }

    #[test]
    fn q_form_rejects_non_tangent() {
        let s = remark_sample(1.0);
        assert!(matches!(q_form_direct(&s, 0, &s.f()), Err(Error::Precondition(_))));
    }

    #[test]
    fn q_form_nonnegative_at_remark_point() {
        let s = ConstraintSample::with_defaults(Spectrum::new(vec![2.0, 2.0, -0.75]).unwrap(), 1.0).unwrap();
        assert_eq!(s.j, default_shift(3, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let t = tangent(&s, &mut rng);
            for i in 0..3 {
                assert!(q_form_direct(&s, i, &t).unwrap() >= -1e-12);
                assert!(q_reduction_eigen(&s, i).unwrap().xi_min() > 0.0);
            }
        }
    }

    #[test]
    fn reduction_gram_data_closed_forms() {
        for n in 2..7 {
            for s in sample_constraint(n, 5.0, 300, 5).unwrap() {
                let f = s.f();
                let df2 = s.df_norm_sq();
                let s1 = s.sigma1();
                let nf = n as f64;
                assert!((df2 - ((nf - 1.0) * s1 * s1 - 2.0)).abs() <= 1e-10 * df2);
                for i in 0..n {
                    let r = q_reduction_eigen(&s, i).unwrap();
                    assert!((r.norm_e2 - (1.0 - f[i] * f[i] / df2)).abs() <= 1e-10);
                    assert!((r.norm_l2 - (1.0 - 2.0 * (nf - 1.0) / df2)).abs() <= 1e-10);
                    assert!((r.e_dot_l - (1.0 - (nf - 1.0) * s1 * f[i] / df2)).abs() <= 1e-10);
                    assert!(r.norm_e2 < 1.0 && r.norm_l2 < 1.0);
                    assert_eq!(r.eta, 1.0 + s.delta * f[i] / (s1 + s.j));
                    let bound = 3.0 - s.delta * f[i] / (s1 + s.j);
                    assert!(r.tr > bound && bound > 0.0);
                }
            }
        }
    }

    #[test]
    fn symmetric_point_reduction() {
        let s = symmetric_sample(0.0);
        let r = q_reduction_eigen(&s, 0).unwrap();
        let f1 = 2.0 / 3f64.sqrt();
        assert!((s.df_norm_sq() - 4.0).abs() < 1e-12);
        assert!((r.norm_e2 - (1.0 - f1 * f1 / 4.0)).abs() < 1e-12);
        // L is orthogonal to the constant direction Df here, so L vanishes.
        assert!(r.norm_l2.abs() < 1e-12);
    }

    #[test]
    fn projected_form_matches_reduction() {
        for n in 2..7 {
            for k in [1.0, 10.0] {
                for s in sample_constraint(n, k, 200, 13).unwrap() {
                    for i in 0..n {
                        let r = q_reduction_eigen(&s, i).unwrap();
                        let p = projected_form(&s, i).unwrap();
                        assert!((p.tr - r.tr).abs() <= 1e-8 * (1.0 + r.tr.abs()));
                        assert!((p.det - r.det).abs() <= 1e-8 * (1.0 + r.det.abs()));
                        assert!((p.min_eigenvalue() - r.xi_min()).abs() <= 1e-8);
                        if r.tr > 0.0 && r.det > 0.0 {
                            assert!(p.min_eigenvalue() >= -1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn det_bound_holds_on_samples() {
        for n in 2..7 {
            for k in [1.0, 5.0, 10.0] {
                for s in sample_constraint(n, k, 500, 17).unwrap() {
                    for i in 0..n {
                        let (lhs, rhs) = det_lower_bound(&s, i).unwrap();
                        assert!(lhs >= rhs - 1e-8 * (1.0 + lhs.abs()), "n={n} i={i} lhs={lhs} rhs={rhs}");
                        assert!(rhs > 0.0);
                        if s.spectrum.values()[i] >= 0.0 {
                            assert!(rhs >= 8.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn det_bound_remark_point() {
        let s = remark_sample(0.75);
        let (_, rhs) = det_lower_bound(&s, 2).unwrap();
        assert!(rhs > 0.0);
        let bad = ConstraintSample::new(s.spectrum.clone(), 0.75, s.j, 0.5).unwrap();
        assert!(matches!(det_lower_bound(&bad, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn remark_examples() {
        let r = remark_3d(2.0, 2.0).unwrap();
        assert!((r.lambda3 + 0.75).abs() < 1e-15);
        assert!((r.ratio - 13.0 / 3.0).abs() < 1e-14);
        let r = remark_3d(1e3, 1e3).unwrap();
        assert!(r.ratio - 3.0 > 0.0 && r.ratio - 3.0 < 1e-5);
        assert!(remark_3d(1.0, 0.5).is_err());
        assert!(remark_3d(0.5, 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let a: f64 = rng.random_range(0.05..50.0);
            let b: f64 = rng.random_range(0.05..50.0);
            let (l1, l2) = if a >= b { (a, b) } else { (b, a) };
            if l1 * l2 <= 1.0 + 1e-6 {
                continue;
            }
            let r = remark_3d(l1, l2).unwrap();
            let s2 = l1 * l2 + (l1 + l2) * r.lambda3;
            assert!((s2 - 1.0).abs() <= 1e-12 * (1.0 + l1 * l2));
            assert!(r.ratio > 3.0 && r.ratio >= r.am_gm_bound - 1e-12 * r.ratio);
            assert!((r.ratio - (l1 + l2 + r.lambda3) / -r.lambda3).abs() <= 1e-9 * r.ratio);
        }
    }

    #[test]
    fn minimal_shift_separates_sign_of_det() {
        for n in 3..7 {
            for s in sample_constraint(n, 10.0, 300, 19).unwrap() {
                for i in 0..n {
                    let jm = minimal_shift(&s, i).unwrap();
                    assert!(jm <= s.j * (1.0 + 1e-9) + 1e-9, "n={n} jm={jm} J={}", s.j);
                    if jm > 1e-6 {
                        let below = s.with_shift(jm * 0.9).unwrap();
                        assert!(q_reduction_eigen(&below, i).unwrap().det <= 1e-9);
                    }
                    let above = s.with_shift(jm * 1.1 + 1e-6).unwrap();
                    assert!(q_reduction_eigen(&above, i).unwrap().det > 0.0);
                }
            }
        }
    }

    #[test]
    fn shift_is_needed_in_four_dimensions() {
        let probe = shift_necessity_probe(4, 10.0, 2 * CHUNK_SIZE, 1).unwrap();
        assert!(probe.violations > 0, "worst det {}", probe.worst_det);
    }
}
