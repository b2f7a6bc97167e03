use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sym::{elementary_symmetric, esp, esp_without, Spectrum};
use crate::tolerances::KBAR_GAP;

/// How `K̄` was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KbarChoice {
    /// `8K/3`.
    EightThirds,
    /// `K + 1 + 1e-6`, used when it exceeds `8K/3` (small `K`).
    UnitGap,
    /// Supplied by the caller.
    User,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformConfig {
    pub n: usize,
    pub k: f64,
    pub kbar: f64,
    pub choice: KbarChoice,
    /// `J = n K̄`.
    pub j: f64,
    /// `(n - 1) K̄`.
    pub a1: f64,
    /// `n(n - 1) K̄² / 2 - 1`.
    pub a2: f64,
}

impl TransformConfig {
    pub fn new(n: usize, k: f64, kbar: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("n = {n} < 2")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("K = {k} must be positive and finite")));
        }
        let (kbar, choice) = match kbar {
            Some(kb) => {
                if !(kb > k && kb.is_finite()) {
                    return Err(Error::Domain(format!("kbar = {kb} must exceed K = {k}")));
                }
                (kb, KbarChoice::User)
            }
            None => {
                let eight = 8.0 * k / 3.0;
                let gap = k + 1.0 + KBAR_GAP;
                if eight >= gap {
                    (eight, KbarChoice::EightThirds)
                } else {
                    (gap, KbarChoice::UnitGap)
                }
            }
        };
        let nf = n as f64;
        Ok(Self {
            n,
            k,
            kbar,
            choice,
            j: nf * kbar,
            a1: (nf - 1.0) * kbar,
            a2: nf * (nf - 1.0) * kbar * kbar / 2.0 - 1.0,
        })
    }

    /// `H(μ) = -σ_{n-2} + A₁ σ_{n-1} - A₂ σ_n`.
    pub fn h_value(&self, mu: &[f64]) -> f64 {
        let e = elementary_symmetric(mu);
        let n = self.n;
        -e[n - 2] + self.a1 * e[n - 1] - self.a2 * e[n]
    }

    /// `∂H/∂μ_i = -σ_{n-3,i} + A₁ σ_{n-2,i} - A₂ σ_{n-1,i}`.
    pub fn h_gradient(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.n as isize;
        (0..mu.len())
            .map(|i| {
                -esp_without(mu, i, n - 3) + self.a1 * esp_without(mu, i, n - 2) - self.a2 * esp_without(mu, i, n - 1)
            })
            .collect()
    }

    /// `G(μ) = -σ₂(1/μ - K̄)`.
    pub fn g_value(&self, mu: &[f64]) -> f64 {
        let x: Vec<f64> = mu.iter().map(|m| 1.0 / m - self.kbar).collect();
        -esp(&x, 2)
    }

    /// `∂G/∂μ_i = (σ₁(x) - x_i) / μ_i²` with `x = 1/μ - K̄`.
    pub fn g_gradient(&self, mu: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = mu.iter().map(|m| 1.0 / m - self.kbar).collect();
        let s1: f64 = x.iter().sum();
        x.iter().zip(mu).map(|(xi, m)| (s1 - xi) / (m * m)).collect()
    }
}

/// Image of one Hessian spectrum under the transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformedState {
    /// Ascending.
    pub mu: Spectrum,
    /// `(σ_n/σ_{n-1})^{1/3}`.
    pub a: f64,
    /// `σ_{n-1}/σ_{n-2}`.
    pub q: f64,
    /// `H(μ)`.
    pub residual: f64,
    pub sigma_n: f64,
}

/// `μ_i = 1/(λ_i + K̄)`.
pub fn transform_spectrum(lambda: &Spectrum, cfg: &TransformConfig) -> Result<TransformedState> {
    if lambda.n() != cfg.n {
        return Err(Error::Domain(format!("spectrum has {} entries, config n = {}", lambda.n(), cfg.n)));
    }
    for (index, &value) in lambda.values().iter().enumerate() {
        if value <= -cfg.kbar {
            return Err(Error::TransformDomain { index, value, neg_kbar: -cfg.kbar });
        }
    }
    let mut mu: Vec<f64> = lambda.values().iter().map(|l| 1.0 / (l + cfg.kbar)).collect();
    mu.sort_by(f64::total_cmp);
    state_from_mu(Spectrum::new(mu)?, cfg)
}

/// State for an arbitrary positive `μ`, such as one read off a grid.
pub fn state_from_mu(mu: Spectrum, cfg: &TransformConfig) -> Result<TransformedState> {
    let n = cfg.n;
    let e = elementary_symmetric(mu.values());
    if e[n - 1] <= 0.0 {
        return Err(Error::Singularity { order: n - 1, value: e[n - 1] });
    }
    let a = (e[n] / e[n - 1]).cbrt();
    let q = quotient_q(&mu)?;
    let residual = -e[n - 2] + cfg.a1 * e[n - 1] - cfg.a2 * e[n];
    Ok(TransformedState { mu, a, q, residual, sigma_n: e[n] })
}

/// `(max μ₁, min_{i≥2} μ_i)` over a batch, with `μ` ascending.
pub fn eigenvalue_bounds_check(states: &[TransformedState]) -> Result<(f64, f64)> {
    if states.is_empty() {
        return Err(Error::Domain("no transformed states".into()));
    }
    let mut c_top = f64::NEG_INFINITY;
    let mut c_rest = f64::INFINITY;
    for s in states {
        let mu = s.mu.sorted_asc();
        c_top = c_top.max(mu[0]);
        c_rest = c_rest.min(mu[1]);
    }
    Ok((c_top, c_rest))
}

/// `q(μ) = σ_{n-1}(μ)/σ_{n-2}(μ)`.
pub fn quotient_q(mu: &Spectrum) -> Result<f64> {
    let n = mu.n();
    let e = elementary_symmetric(mu.values());
    let d = e[n - 2];
    if !(d.abs() >= f64::MIN_POSITIVE) || !d.is_finite() {
        return Err(Error::Singularity { order: n - 2, value: d });
    }
    Ok(e[n - 1] / d)
}

/// `∂q/∂μ_i = [σ_{n-2,i} σ_{n-2} - σ_{n-1} σ_{n-3,i}] / σ_{n-2}²`.
pub fn q_ellipticity(mu: &Spectrum) -> Result<Vec<f64>> {
    if let Some((index, &value)) = mu.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::Domain(format!("mu_{index} = {value} is not positive")));
    }
    let n = mu.n() as isize;
    let v = mu.values();
    let e = elementary_symmetric(v);
    let s2 = e[(n - 2) as usize];
    let s1 = e[(n - 1) as usize];
    Ok((0..v.len())
        .map(|i| (esp_without(v, i, n - 2) * s2 - s1 * esp_without(v, i, n - 3)) / (s2 * s2))
        .collect())
}
