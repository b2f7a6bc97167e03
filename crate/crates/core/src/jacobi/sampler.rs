use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sym::{esp, Spectrum};
use crate::tolerances::{
    CONSTRAINT, FLOOR_SLACK, SAMPLER_MIN_ACCEPTANCE, SAMPLER_MIN_REST_TRACE,
    SAMPLER_PIN_PROBABILITY, SAMPLER_WINDOW, UNBOUNDED_DRAW_RANGE,
};

/// Items drawn from one random stream before moving to the next.
pub const CHUNK_SIZE: usize = 1024;

/// Generator for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// A point of `{σ₂ = 1, σ₁ > 0, λ ≥ -K}` with the certificate parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSample {
    pub spectrum: Spectrum,
    /// Semiconvexity constant; `f64::INFINITY` drops the lower bound.
    pub k: f64,
    pub j: f64,
    pub epsilon: f64,
    pub delta: f64,
}

pub fn default_shift(n: usize, k: f64) -> f64 {
    8.0 * n as f64 * k / 3.0
}

pub const DEFAULT_EPSILON: f64 = 1.0 / 3.0;

impl ConstraintSample {
    pub fn new(spectrum: Spectrum, k: f64, j: f64, epsilon: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("K = {k} must be positive")));
        }
        if !(j >= 0.0) || !j.is_finite() {
            return Err(Error::Domain(format!("J = {j} must be finite and non-negative")));
        }
        let defect = spectrum.constraint_defect();
        if defect > CONSTRAINT {
            return Err(Error::Precondition(format!(
                "sigma_2 relative defect {defect:e} exceeds {CONSTRAINT:e}"
            )));
        }
        if !(spectrum.trace() > 0.0) {
            return Err(Error::Branch { trace: spectrum.trace() });
        }
        if k.is_finite() && spectrum.min() < -k - FLOOR_SLACK {
            return Err(Error::Precondition(format!(
                "eigenvalue {} below -K = {}",
                spectrum.min(),
                -k
            )));
        }
        Ok(Self { spectrum, k, j, epsilon, delta: 1.0 + epsilon })
    }

    /// `J = 8nK/3`, `ε = 1/3`.
    pub fn with_defaults(spectrum: Spectrum, k: f64) -> Result<Self> {
        let j = default_shift(spectrum.n(), k);
        Self::new(spectrum, k, j, DEFAULT_EPSILON)
    }

    pub fn n(&self) -> usize {
        self.spectrum.n()
    }

    pub fn sigma1(&self) -> f64 {
        self.spectrum.trace()
    }

    /// `f_i = σ₁ - λ_i`.
    pub fn f(&self) -> Vec<f64> {
        let s1 = self.sigma1();
        self.spectrum.values().iter().map(|l| s1 - l).collect()
    }

    /// `|Df|² = Σ f_i²`.
    pub fn df_norm_sq(&self) -> f64 {
        self.f().iter().map(|x| x * x).sum()
    }

    pub fn with_shift(&self, j: f64) -> Result<Self> {
        Self::new(self.spectrum.clone(), self.k, j, self.epsilon)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n: usize,
    pub k: f64,
    /// Upper end of the draw range; `None` means `10(1 + K)`.
    pub upper: Option<f64>,
    pub j: Option<f64>,
    pub epsilon: f64,
    pub pin_probability: f64,
}

impl SamplerConfig {
    pub fn new(n: usize, k: f64) -> Self {
        Self { n, k, upper: None, j: None, epsilon: DEFAULT_EPSILON, pin_probability: SAMPLER_PIN_PROBABILITY }
    }

    /// Draw interval for `λ₂, …, λ_n`.
    pub fn range(&self) -> (f64, f64) {
        if self.k.is_finite() {
            (-self.k, self.upper.unwrap_or(10.0 * (1.0 + self.k)))
        } else {
            (-UNBOUNDED_DRAW_RANGE, self.upper.unwrap_or(UNBOUNDED_DRAW_RANGE))
        }
    }

    pub fn shift(&self) -> f64 {
        self.j.unwrap_or_else(|| default_shift(self.n, self.k))
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain(format!("n = {} < 2", self.n)));
        }
        if !(self.k > 0.0) {
            return Err(Error::Domain(format!("K = {} must be positive", self.k)));
        }
        if !self.k.is_finite() && self.j.is_none() {
            return Err(Error::Domain("an unbounded sampler needs an explicit J".into()));
        }
        let (lo, hi) = self.range();
        if !(hi > lo) {
            return Err(Error::Domain(format!("empty draw range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Rejection sampler with starvation detection over a sliding window.
#[derive(Debug, Clone)]
pub struct ConstraintSampler {
    config: SamplerConfig,
    window_attempts: u64,
    window_accepted: u64,
    last_reason: &'static str,
}

impl ConstraintSampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, window_attempts: 0, window_accepted: 0, last_reason: "none" })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ConstraintSample> {
        let n = self.config.n;
        let (lo, hi) = self.config.range();
        loop {
            self.window_attempts += 1;
            let mut rest: Vec<f64> = (0..n - 1).map(|_| rng.random_range(lo..hi)).collect();
            if self.config.k.is_finite() && rng.random::<f64>() < self.config.pin_probability {
                let idx = rng.random_range(0..n - 1);
                rest[idx] = -self.config.k;
            }
            match self.complete(rest) {
                Ok(s) => {
                    self.window_accepted += 1;
                    self.roll_window()?;
                    return Ok(s);
                }
                Err(reason) => {
                    self.last_reason = reason;
                    self.roll_window()?;
                }
            }
        }
    }

    fn roll_window(&mut self) -> Result<()> {
        if self.window_attempts >= SAMPLER_WINDOW {
            let rate = self.window_accepted as f64 / self.window_attempts as f64;
            if rate < SAMPLER_MIN_ACCEPTANCE {
                return Err(Error::SamplerStarvation {
                    attempts: self.window_attempts,
                    accepted: self.window_accepted,
                    last_reason: self.last_reason,
                });
            }
            self.window_attempts = 0;
            self.window_accepted = 0;
        }
        Ok(())
    }

    /// Solves `σ₂ = 1` for `λ₁` given the remaining eigenvalues.
    fn complete(&self, rest: Vec<f64>) -> std::result::Result<ConstraintSample, &'static str> {
        let s1 = esp(&rest, 1);
        if s1 <= SAMPLER_MIN_REST_TRACE {
            return Err("sigma_1 of the remaining eigenvalues too small");
        }
        let l1 = (1.0 - esp(&rest, 2)) / s1;
        if self.config.k.is_finite() && l1 < -self.config.k {
            return Err("solved eigenvalue below -K");
        }
        let mut values = Vec::with_capacity(rest.len() + 1);
        values.push(l1);
        values.extend(rest);
        let spectrum = Spectrum::new(values).map_err(|_| "non-finite eigenvalue")?;
        if spectrum.trace() <= 0.0 {
            return Err("negative trace branch");
        }
        ConstraintSample::new(spectrum, self.config.k, self.config.shift(), self.config.epsilon)
            .map_err(|_| "constraint tolerance")
    }
}

/// `count` samples, reproducible for a fixed seed regardless of thread count.
pub fn sample_constraint(n: usize, k: f64, count: usize, seed: u64) -> Result<Vec<ConstraintSample>> {
    sample_with(&SamplerConfig::new(n, k), count, seed)
}

pub fn sample_with(config: &SamplerConfig, count: usize, seed: u64) -> Result<Vec<ConstraintSample>> {
    if count == 0 {
        return Err(Error::Domain("count must be at least 1".into()));
    }
    ConstraintSampler::new(config.clone())?;
    let chunks = count.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<Vec<ConstraintSample>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let mut sampler = ConstraintSampler::new(config.clone())?;
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            (0..len).map(|_| sampler.draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Samples along rays where one eigenvalue grows geometrically up to `top`.
pub fn sample_rays(config: &SamplerConfig, rays: usize, steps: usize, top: f64, seed: u64) -> Result<Vec<ConstraintSample>> {
    Ok(sample_ray_family(config, rays, steps, top, seed)?.into_iter().flatten().collect())
}

/// As [`sample_rays`], grouped by ray. Steps whose completion leaves the
/// admissible set are dropped.
pub fn sample_ray_family(
    config: &SamplerConfig,
    rays: usize,
    steps: usize,
    top: f64,
    seed: u64,
) -> Result<Vec<Vec<ConstraintSample>>> {
    config.validate()?;
    if config.n < 2 || steps < 2 || !(top > 1.0) {
        return Err(Error::Domain("ray sampler needs steps >= 2 and top > 1".into()));
    }
    let (lo, _) = config.range();
    // The solved eigenvalue tends to -(sum of the others), so keep that sum
    // above -K for the ray to stay admissible.
    let hi = if config.k.is_finite() { 0.9 * config.k / (config.n.max(3) - 2) as f64 } else { UNBOUNDED_DRAW_RANGE };
    let mut rng = chunk_rng(seed, u64::MAX);
    let sampler = ConstraintSampler::new(config.clone())?;
    let mut out = Vec::with_capacity(rays);
    for _ in 0..rays {
        let others: Vec<f64> = (0..config.n - 2).map(|_| rng.random_range(lo..hi)).collect();
        let mut ray = Vec::with_capacity(steps);
        for s in 0..steps {
            let scale = top.powf(s as f64 / (steps - 1) as f64);
            let mut rest = vec![scale];
            rest.extend(&others);
            if let Ok(sample) = sampler.complete(rest) {
                ray.push(sample);
            }
        }
        out.push(ray);
    }
    Ok(out)
}
