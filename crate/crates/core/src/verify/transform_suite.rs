use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CheckSet, SuiteReport};
use crate::error::{Error, Result};
use crate::jacobi::{chunk_rng, sample_ray_family, ConstraintSampler, SamplerConfig, CHUNK_SIZE};
use crate::legendre::{q_ellipticity, quotient_q, transform_spectrum, TransformConfig};
use crate::sym::{esp, Spectrum};
use crate::tolerances::{
    CONCAVITY_SLACK, FINITE_DIFFERENCE_REL, HARMONIC_MEAN_IDENTITY, QUOTIENT_IDENTITY, TRACE_IDENTITY,
    TRANSFORM_IDENTITY, TRANSFORM_RESIDUAL,
};

pub const RAY_COUNT: usize = 64;
pub const RAY_STEPS: usize = 40;
pub const RAY_TOP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSuiteConfig {
    pub n: usize,
    pub k: f64,
    pub kbar: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Adds the family where one eigenvalue grows to `RAY_TOP`.
    pub ray: bool,
}

impl TransformSuiteConfig {
    pub fn new(n: usize, k: f64, samples: usize, seed: u64) -> Self {
        Self { n, k, kbar: None, samples, seed, ray: false }
    }
}

#[derive(Debug, Clone)]
struct Extremes {
    c_top: f64,
    c_rest: f64,
    dq_min: f64,
    dq_max: f64,
    mu_lo: f64,
    mu_hi: f64,
}

impl Extremes {
    fn new() -> Self {
        Self {
            c_top: f64::NEG_INFINITY,
            c_rest: f64::INFINITY,
            dq_min: f64::INFINITY,
            dq_max: f64::NEG_INFINITY,
            mu_lo: f64::INFINITY,
            mu_hi: f64::NEG_INFINITY,
        }
    }

    fn merge(&mut self, o: &Extremes) {
        self.c_top = self.c_top.max(o.c_top);
        self.c_rest = self.c_rest.min(o.c_rest);
        self.dq_min = self.dq_min.min(o.dq_min);
        self.dq_max = self.dq_max.max(o.dq_max);
        self.mu_lo = self.mu_lo.min(o.mu_lo);
        self.mu_hi = self.mu_hi.max(o.mu_hi);
    }
}

/// Relative error of central differences of `q` against [`q_ellipticity`],
/// with the step scaled to each coordinate.
fn fd_ellipticity_error(mu: &[f64], grad: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..mu.len() {
        let h = 1e-4 * mu[i];
        let mut p = mu.to_vec();
        let mut m = mu.to_vec();
        p[i] += h;
        m[i] -= h;
        let fd = (quotient_q(&Spectrum::new(p)?)? - quotient_q(&Spectrum::new(m)?)?) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs());
    }
    Ok(worst)
}

fn record_state(
    checks: &mut CheckSet,
    ext: &mut Extremes,
    cfg: &TransformConfig,
    lambda: &Spectrum,
    item: u64,
) -> Result<Vec<f64>> {
    let n = cfg.n;
    let st = transform_spectrum(lambda, cfg)?;
    let mu = st.mu.values().to_vec();
    let wit = |note: &str| {
        let l = lambda.values().to_vec();
        let note = note.to_string();
        move || (l, note)
    };

    checks.get_mut("transform_residual", true, false).record(TRANSFORM_RESIDUAL - st.residual.abs(), item, wit("H(mu)"));
    let defect = 1.0 - esp(lambda.values(), 2);
    let scale = esp(&mu, n as isize - 2).abs() + cfg.a1 * esp(&mu, n as isize - 1) + cfg.a2.abs() * st.sigma_n;
    let fact = (st.residual - st.sigma_n * defect).abs() / scale.max(1.0);
    checks.get_mut("residual_factorization", true, false).record(TRANSFORM_IDENTITY - fact, item, wit("H vs sigma_n(1 - sigma_2)"));

    let inv_sum: f64 = mu.iter().map(|m| 1.0 / m).sum();
    let trace = lambda.trace() + n as f64 * cfg.kbar;
    checks
        .get_mut("trace_identity", true, false)
        .record(TRACE_IDENTITY - (trace - inv_sum).abs() / inv_sum, item, wit("trace identity"));
    let a3 = st.a.powi(3);
    checks
        .get_mut("harmonic_mean", true, false)
        .record(HARMONIC_MEAN_IDENTITY - (a3 * inv_sum - 1.0).abs(), item, wit("a^3 sum 1/mu"));
    let via_a = 1.0 / (cfg.a1 - cfg.a2 * a3);
    checks
        .get_mut("quotient_identity", true, false)
        .record(QUOTIENT_IDENTITY - (st.q - via_a).abs() / st.q, item, wit("q vs 1/(A1 - A2 a^3)"));

    let lo = mu[0];
    let hi = mu[n - 1];
    checks.get_mut("mu_range", true, true).record(lo.min(1.0 - hi), item, wit("min(mu_min, 1 - mu_max)"));
    ext.c_top = ext.c_top.max(lo);
    ext.c_rest = ext.c_rest.min(mu[1]);
    ext.mu_lo = ext.mu_lo.min(lo);
    ext.mu_hi = ext.mu_hi.max(hi);

    let grad = q_ellipticity(&st.mu)?;
    let gmin = grad.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ext.dq_min = ext.dq_min.min(gmin);
    ext.dq_max = ext.dq_max.max(gmax);
    checks.get_mut("q_ellipticity", true, true).record(gmin, item, wit("min dq/dmu"));
    let fd = fd_ellipticity_error(&mu, &grad)?;
    checks.get_mut("q_ellipticity_fd", true, false).record(FINITE_DIFFERENCE_REL - fd, item, wit("finite difference"));
    Ok(mu)
}

/// Maps on-manifold spectra through the transform and checks the resulting
/// identities, the range of `μ`, and ellipticity and concavity of `q`.
pub fn run_transform_suite(cfg: &TransformSuiteConfig) -> Result<SuiteReport> {
    if cfg.samples == 0 {
        return Err(Error::Domain("samples must be at least 1".into()));
    }
    let tcfg = TransformConfig::new(cfg.n, cfg.k, cfg.kbar)?;
    let scfg = SamplerConfig::new(cfg.n, cfg.k);
    ConstraintSampler::new(scfg.clone())?;
    let chunks = cfg.samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<(CheckSet, Extremes)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(cfg.seed, c as u64);
            let mut sampler = ConstraintSampler::new(scfg.clone())?;
            let mut checks = CheckSet::default();
            let mut ext = Extremes::new();
            let len = CHUNK_SIZE.min(cfg.samples - c * CHUNK_SIZE);
            let mut prev: Option<Vec<f64>> = None;
            for local in 0..len {
                let item = (c * CHUNK_SIZE + local) as u64;
                let s = sampler.draw(&mut rng)?;
                let mu = record_state(&mut checks, &mut ext, &tcfg, &s.spectrum, item)?;
                // Concavity along the chord to the previous sample; both
                // endpoints are sorted, so the chord stays in the rectangle.
                if let Some(p) = prev.take() {
                    let mid: Vec<f64> = mu.iter().zip(&p).map(|(a, b)| 0.5 * (a + b)).collect();
                    let qm = quotient_q(&Spectrum::new(mid.clone())?)?;
                    let qa = quotient_q(&Spectrum::new(mu.clone())?)?;
                    let qb = quotient_q(&Spectrum::new(p)?)?;
                    checks
                        .get_mut("q_concavity", true, false)
                        .record(qm - 0.5 * (qa + qb) + CONCAVITY_SLACK, item, || (mid, "midpoint".into()));
                }
                prev = Some(mu);
            }
            Ok((checks, ext))
        })
        .collect();
    let mut report = SuiteReport::default();
    let mut ext = Extremes::new();
    for p in parts {
        let (c, e) = p?;
        report.checks.merge(c);
        ext.merge(&e);
    }
    let d = &mut report.diagnostics;
    d.insert("kbar".into(), tcfg.kbar);
    d.insert("c_top".into(), ext.c_top);
    d.insert("c_rest".into(), ext.c_rest);
    d.insert("mu_min".into(), ext.mu_lo);
    d.insert("mu_max".into(), ext.mu_hi);
    d.insert("dq_min".into(), ext.dq_min);
    d.insert("dq_max".into(), ext.dq_max);
    if cfg.ray {
        run_rays(cfg, &tcfg, &scfg, &mut report)?;
    }
    Ok(report)
}

fn run_rays(cfg: &TransformSuiteConfig, tcfg: &TransformConfig, scfg: &SamplerConfig, report: &mut SuiteReport) -> Result<()> {
    let family = sample_ray_family(scfg, RAY_COUNT, RAY_STEPS, RAY_TOP, cfg.seed)?;
    let mut checks = CheckSet::default();
    let mut ext = Extremes::new();
    let mut top_min = f64::INFINITY;
    for (r, ray) in family.iter().enumerate() {
        let mut floors = Vec::with_capacity(ray.len());
        for (s, sample) in ray.iter().enumerate() {
            let item = (r * RAY_STEPS + s) as u64;
            let mu = record_state(&mut checks, &mut ext, tcfg, &sample.spectrum, item)?;
            floors.push(mu[1]);
            top_min = top_min.min(mu[0]);
        }
        if ray.len() < 2 {
            continue;
        }
        // The remaining eigenvalues of D²w must not follow μ₁ to zero as the
        // top eigenvalue grows: compare their floor late on the ray with the
        // floor near its start.
        let half = floors.len() / 2;
        let early = floors[..half].iter().copied().fold(f64::INFINITY, f64::min);
        let late = floors[half..].iter().copied().fold(f64::INFINITY, f64::min);
        let last = ray.last().unwrap().spectrum.values().to_vec();
        checks
            .get_mut("ray_rest_floor", true, false)
            .record(late / early - 0.5, (r * RAY_STEPS) as u64, || (last, "late floor / early floor - 1/2".into()));
    }
    for c in checks.checks.iter_mut() {
        c.name = format!("ray_{}", c.name.trim_start_matches("ray_"));
    }
    report.checks.merge(checks);
    let d = &mut report.diagnostics;
    d.insert("ray_count".into(), family.iter().filter(|r| !r.is_empty()).count() as f64);
    d.insert("ray_mu_top_min".into(), top_min);
    d.insert("ray_c_rest".into(), ext.c_rest);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_suite_is_clean() {
        for n in [2, 3, 4, 6] {
            for k in [1.0, 10.0] {
                let mut cfg = TransformSuiteConfig::new(n, k, 2000, 3);
                cfg.ray = true;
                let r = run_transform_suite(&cfg).unwrap();
                for c in &r.checks.checks {
                    assert!(c.ok(), "n={n} K={k} {}: worst {:e} {:?}", c.name, c.worst_margin, c.witness);
                }
                assert!(r.diagnostics["ray_mu_top_min"] < 2.0 / RAY_TOP);
                assert!(r.diagnostics["ray_c_rest"] > 0.0);
            }
        }
    }

    #[test]
    fn kbar_not_above_k_is_rejected() {
        let mut cfg = TransformSuiteConfig::new(3, 1.0, 10, 0);
        cfg.kbar = Some(0.1);
        assert!(run_transform_suite(&cfg).is_err());
    }

    #[test]
    fn threads_do_not_change_reports() {
        let mut cfg = TransformSuiteConfig::new(3, 5.0, 2 * CHUNK_SIZE + 5, 8);
        cfg.ray = true;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_transform_suite(&cfg)).unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_transform_suite(&cfg)).unwrap();
        assert_eq!(one, three);
    }
}
