use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All elementary symmetric polynomials `σ_0, …, σ_len` of `values`.
///
/// Coefficients of `Π (1 + λ_i t)` built one factor at a time, which stays
/// accurate for mixed-sign input where subset sums would cancel badly.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (count, &lambda) in values.iter().enumerate() {
        for j in (1..=count + 1).rev() {
            e[j] += lambda * e[j - 1];
        }
    }
    e
}

/// `σ_k(values)` for any `k`, with `σ_k = 0` outside `0..=len` (and `σ_{-1} = 0`).
pub fn esp(values: &[f64], k: isize) -> f64 {
    if k < 0 || k as usize > values.len() {
        return 0.0;
    }
    let k = k as usize;
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (count, &lambda) in values.iter().enumerate() {
        for j in (1..=k.min(count + 1)).rev() {
            e[j] += lambda * e[j - 1];
        }
    }
    e[k]
}

/// `σ_k` of everything except entry `skip`.
pub(crate) fn esp_without(values: &[f64], skip: usize, k: isize) -> f64 {
    if k < 0 || k as usize > values.len().saturating_sub(1) {
        return 0.0;
    }
    let k = k as usize;
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    let mut count = 0;
    for (idx, &lambda) in values.iter().enumerate() {
        if idx == skip {
            continue;
        }
        for j in (1..=k.min(count + 1)).rev() {
            e[j] += lambda * e[j - 1];
        }
        count += 1;
    }
    e[k]
}

/// An unordered list of `n >= 2` real eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain(format!(
                "a spectrum needs at least 2 eigenvalues, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite eigenvalue {bad}")));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Non-increasing copy; the stored order is left alone.
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn sorted_asc(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sigma(&self, k: usize) -> Result<f64> {
        sigma_k(self, k)
    }

    /// `σ_2` of the absolute values: the natural scale for relative checks of `σ₂ = 1`.
    pub fn sigma2_scale(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        esp(&abs, 2)
    }

    /// Relative defect `|σ₂ - 1| / max(1, σ₂(|λ|))`.
    pub fn constraint_defect(&self) -> f64 {
        (esp(&self.values, 2) - 1.0).abs() / self.sigma2_scale().max(1.0)
    }
}

/// The `k`-th elementary symmetric polynomial, `0 <= k <= n`.
pub fn sigma_k(s: &Spectrum, k: usize) -> Result<f64> {
    if k > s.n() {
        return Err(Error::Domain(format!("k = {k} exceeds n = {}", s.n())));
    }
    Ok(esp(&s.values, k as isize))
}

/// `∂σ_k/∂λ_i = σ_{k-1}(λ with λ_i removed)`, `1 <= k <= n`, 0-based `i`.
pub fn sigma_k_partial(s: &Spectrum, k: usize, i: usize) -> Result<f64> {
    if k == 0 || k > s.n() {
        return Err(Error::Domain(format!("k = {k} outside 1..={}", s.n())));
    }
    if i >= s.n() {
        return Err(Error::Domain(format!("index {i} out of range for n = {}", s.n())));
    }
    Ok(esp_without(&s.values, i, k as isize - 1))
}

/// `σ_k / σ_l` for `0 <= l < k <= n`.
pub fn quotient(s: &Spectrum, k: usize, l: usize) -> Result<f64> {
    if l >= k || k > s.n() {
        return Err(Error::Domain(format!(
            "quotient needs 0 <= l < k <= n, got k = {k}, l = {l}, n = {}",
            s.n()
        )));
    }
    let e = elementary_symmetric(&s.values);
    let denom = e[l];
    if denom == 0.0 || !denom.is_finite() || denom.abs() < f64::MIN_POSITIVE {
        return Err(Error::Singularity { order: l, value: denom });
    }
    Ok(e[k] / denom)
}
