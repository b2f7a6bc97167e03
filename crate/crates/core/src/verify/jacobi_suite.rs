use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CheckSet, Histogram, SuiteReport};
use crate::error::{Error, Result};
use crate::jacobi::{
    chunk_rng, default_shift, det_lower_bound, excess_decomposition, jacobi_excess, minimal_shift_sample, project_jet,
    projected_form, q_reduction_eigen, remark_3d, superharmonic_form, tangency_residual, ConstraintSampler,
    SamplerConfig, SymTensor3, CHUNK_SIZE, DEFAULT_EPSILON,
};
use crate::sym::esp;
use crate::tolerances::{
    CONSTRAINT, DECOMPOSITION_IDENTITY, DET_BOUND, EXCESS_FLOOR, PROJECTED_FORM_FLOOR, REDUCTION_ORACLE,
    SUPERHARMONIC_IDENTITY, TANGENCY,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiSuiteConfig {
    pub n: usize,
    /// Semiconvexity constant; infinite disables the floor.
    pub k: f64,
    /// `None` means `8nK/3`.
    pub j: Option<f64>,
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
}

impl JacobiSuiteConfig {
    pub fn new(n: usize, k: f64, samples: usize, seed: u64) -> Self {
        Self { n, k, j: None, epsilon: DEFAULT_EPSILON, samples, seed }
    }

    pub fn shift(&self) -> f64 {
        self.j.unwrap_or_else(|| default_shift(self.n, self.k))
    }

    fn sampler_config(&self) -> SamplerConfig {
        let mut c = SamplerConfig::new(self.n, self.k);
        c.j = self.j;
        c.epsilon = self.epsilon;
        c
    }

    /// The shift and exponent for which the lower bound on the determinant
    /// is a contract.
    fn certificate_mode(&self) -> bool {
        self.k.is_finite() && self.j.is_none_or(|j| j == default_shift(self.n, self.k)) && self.epsilon == DEFAULT_EPSILON
    }
}

#[derive(Debug, Clone, Default)]
struct Extremes {
    j_min: f64,
    excess_min: f64,
    tr_min: f64,
    det_min: f64,
}

impl Extremes {
    fn new() -> Self {
        Self { j_min: 0.0, excess_min: f64::INFINITY, tr_min: f64::INFINITY, det_min: f64::INFINITY }
    }

    fn merge(&mut self, o: &Extremes) {
        self.j_min = self.j_min.max(o.j_min);
        self.excess_min = self.excess_min.min(o.excess_min);
        self.tr_min = self.tr_min.min(o.tr_min);
        self.det_min = self.det_min.min(o.det_min);
    }
}

struct Partial {
    checks: CheckSet,
    excess: Histogram,
    extremes: Extremes,
}

/// Samples on `σ₂ = 1` with projected random jets, checking the certificate
/// and its reduction to a two-dimensional form.
pub fn run_jacobi_suite(cfg: &JacobiSuiteConfig) -> Result<SuiteReport> {
    if cfg.samples == 0 {
        return Err(Error::Domain("samples must be at least 1".into()));
    }
    if !(cfg.epsilon > -1.0) || !cfg.epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon = {} must exceed -1", cfg.epsilon)));
    }
    let sampler_cfg = cfg.sampler_config();
    ConstraintSampler::new(sampler_cfg.clone())?;
    let chunks = cfg.samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<Partial>> = (0..chunks)
        .into_par_iter()
        .map(|c| run_chunk(cfg, &sampler_cfg, c))
        .collect();
    let mut report = SuiteReport::default();
    let mut excess = Histogram::default();
    let mut extremes = Extremes::new();
    for p in parts {
        let p = p?;
        report.checks.merge(p.checks);
        excess.merge(p.excess);
        extremes.merge(&p.extremes);
    }
    report.histograms.insert("jacobi_excess".into(), excess);
    let d = &mut report.diagnostics;
    d.insert("shift".into(), cfg.shift());
    d.insert("delta".into(), 1.0 + cfg.epsilon);
    d.insert("empirical_min_shift".into(), extremes.j_min);
    d.insert("min_excess".into(), extremes.excess_min);
    d.insert("min_reduction_trace".into(), extremes.tr_min);
    d.insert("min_reduction_det".into(), extremes.det_min);
    Ok(report)
}

fn run_chunk(cfg: &JacobiSuiteConfig, sampler_cfg: &SamplerConfig, chunk: usize) -> Result<Partial> {
    let n = cfg.n;
    let mut rng = chunk_rng(cfg.seed, chunk as u64);
    let mut sampler = ConstraintSampler::new(sampler_cfg.clone())?;
    let len = CHUNK_SIZE.min(cfg.samples - chunk * CHUNK_SIZE);
    let mut checks = CheckSet::default();
    let mut hist = Histogram::default();
    let mut ext = Extremes::new();
    let delta = 1.0 + cfg.epsilon;
    let certificate = cfg.certificate_mode();
    for local in 0..len {
        let item = (chunk * CHUNK_SIZE + local) as u64;
        let sample = sampler.draw(&mut rng)?;
        let raw = SymTensor3::random(n, &mut rng)?;
        let jet = project_jet(&sample, &raw)?;
        let lambda = sample.spectrum.values().to_vec();
        let wit = |note: &str| {
            let l = lambda.clone();
            let note = note.to_string();
            move || (l, note)
        };

        let defect = (esp(&lambda, 2) - 1.0).abs() / sample.spectrum.sigma2_scale().max(1.0);
        checks.get_mut("constraint", true, false).record(CONSTRAINT - defect, item, wit("sigma_2 defect"));
        let tang = tangency_residual(&sample, &jet.c);
        checks.get_mut("tangency", true, false).record(TANGENCY - tang, item, wit("tangency residual"));

        let excess = jacobi_excess(&jet);
        hist.add(excess);
        ext.excess_min = ext.excess_min.min(excess);
        checks.get_mut("jacobi_excess", true, false).record(excess + EXCESS_FLOOR, item, wit("excess"));

        let shifted = sample.sigma1() + sample.j;
        let dec = excess_decomposition(&jet)?;
        let scale = 1.0 + dec.distinct + dec.q_terms.iter().map(|q| q.abs()).sum::<f64>();
        let gap = (shifted * excess - dec.total()).abs() / scale;
        checks
            .get_mut("decomposition_identity", true, false)
            .record(DECOMPOSITION_IDENTITY - gap, item, wit("decomposition"));

        if cfg.epsilon == DEFAULT_EPSILON {
            let sh = superharmonic_form(&jet)?;
            let pref = shifted.powf(-1.0 / 3.0) / 3.0;
            let other = -pref * excess;
            let gap = (sh - other).abs() / (pref * (1.0 + scale / shifted));
            checks
                .get_mut("superharmonic_identity", true, false)
                .record(SUPERHARMONIC_IDENTITY - gap, item, wit("two superharmonic routes"));
            checks
                .get_mut("superharmonic_sign", true, false)
                .record(pref * EXCESS_FLOOR - sh, item, wit("superharmonic form"));
        }

        ext.j_min = ext.j_min.max(minimal_shift_sample(&sample)?);
        for i in 0..n {
            let red = q_reduction_eigen(&sample, i)?;
            let proj = projected_form(&sample, i)?;
            ext.tr_min = ext.tr_min.min(red.tr);
            ext.det_min = ext.det_min.min(red.det);
            let rel = ((red.tr - proj.tr).abs() / (1.0 + red.tr.abs())).max((red.det - proj.det).abs() / (1.0 + red.det.abs()));
            checks.get_mut("reduction_oracle", true, false).record(REDUCTION_ORACLE - rel, item, wit("closed form vs projected form"));

            // On the tangent space Q has the two reduced eigenvalues and
            // n - 3 copies of 3, so it is bounded below by min(3, ξ_min)|t|².
            let t = jet.c.diagonal_slice(i);
            let t2: f64 = t.iter().map(|x| x * x).sum();
            let q = dec.q_terms[i];
            let floor = red.xi_min().min(3.0) * t2;
            let tol = REDUCTION_ORACLE * (1.0 + t2 * (3.0 + red.eta.abs() * n as f64));
            checks.get_mut("q_form_cross_check", true, false).record(q - floor + tol, item, wit("Q(t) vs reduced eigenvalue"));

            if red.tr > 0.0 && red.det > 0.0 {
                checks
                    .get_mut("reduction_soundness", true, false)
                    .record(proj.min_eigenvalue() + PROJECTED_FORM_FLOOR, item, wit("projected form"));
            }
            if delta <= 1.5 {
                checks.get_mut("trace_positive", true, true).record(red.tr, item, wit("reduced trace"));
            }
            if sample.delta == 4.0 / 3.0 {
                let (lhs, rhs) = det_lower_bound(&sample, i)?;
                checks
                    .get_mut("det_lower_bound", true, false)
                    .record(lhs - rhs + DET_BOUND * (1.0 + lhs.abs()), item, wit("det bound"));
                if certificate {
                    checks.get_mut("det_bound_positive", true, true).record(rhs, item, wit("det bound rhs"));
                }
            }
        }
    }
    Ok(Partial { checks, excess: hist, extremes: ext })
}

/// For `λ₁ ≥ λ₂ > 0` with `λ₁λ₂ > 1` the third eigenvalue on `σ₂ = 1` is
/// negative; checks `σ₁ / (-λ₃) > 3` and the AM-GM bound.
pub fn run_remark_ratio(count: usize, seed: u64) -> Result<SuiteReport> {
    if count == 0 {
        return Err(Error::Domain("count must be at least 1".into()));
    }
    let chunks = count.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<CheckSet>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            // Separate streams from the jet suite for the same seed.
            let mut rng = chunk_rng(seed, (1 << 40) + c as u64);
            let mut checks = CheckSet::default();
            let len = CHUNK_SIZE.min(count - c * CHUNK_SIZE);
            let mut done = 0;
            while done < len {
                let a = 10f64.powf(rng.random_range(-2.0..3.0));
                let b = 10f64.powf(rng.random_range(-2.0..3.0));
                if a * b <= 1.0 + 1e-9 {
                    continue;
                }
                let item = (c * CHUNK_SIZE + done) as u64;
                done += 1;
                let (l1, l2) = if a >= b { (a, b) } else { (b, a) };
                let r = remark_3d(l1, l2)?;
                let w = |note: &'static str| move || (vec![l1, l2, r.lambda3], note.to_string());
                let defect = (esp(&[l1, l2, r.lambda3], 2) - 1.0).abs() / esp(&[l1, l2, r.lambda3.abs()], 2).max(1.0);
                checks.get_mut("remark_constraint", true, false).record(CONSTRAINT - defect, item, w("sigma_2 defect"));
                checks.get_mut("remark_ratio", true, true).record(r.ratio - 3.0, item, w("ratio - 3"));
                checks
                    .get_mut("remark_am_gm", true, false)
                    .record(r.ratio - r.am_gm_bound + 1e-12 * r.ratio.abs(), item, w("ratio - bound"));
                let direct = (l1 + l2 + r.lambda3) / -r.lambda3;
                checks
                    .get_mut("remark_ratio_direct", true, false)
                    .record(1e-10 - (direct - r.ratio).abs() / r.ratio, item, w("closed form vs quotient"));
            }
            Ok(checks)
        })
        .collect();
    let mut report = SuiteReport::default();
    for p in parts {
        report.checks.merge(p?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_suite_is_clean() {
        for n in [2, 3, 5] {
            let r = run_jacobi_suite(&JacobiSuiteConfig::new(n, 5.0, 3000, 42)).unwrap();
            for c in &r.checks.checks {
                assert!(c.ok(), "n={n} {}: worst {:e} {:?}", c.name, c.worst_margin, c.witness);
            }
            assert!(r.checks.get("det_lower_bound").unwrap().count == 3000 * n as u64);
        }
    }

    #[test]
    fn remark_mode_runs() {
        let mut cfg = JacobiSuiteConfig::new(3, f64::INFINITY, 3000, 5);
        cfg.j = Some(0.0);
        let r = run_jacobi_suite(&cfg).unwrap();
        assert!(r.checks.get("jacobi_excess").unwrap().ok());
        assert!(r.checks.get("det_bound_positive").is_none());
        let ratio = run_remark_ratio(5000, 5).unwrap();
        assert!(ratio.all_hard_ok(), "{:?}", ratio.checks);
    }

    #[test]
    fn exploratory_epsilon_skips_structured_checks() {
        let mut cfg = JacobiSuiteConfig::new(4, 1.0, 500, 1);
        cfg.epsilon = 0.9;
        let r = run_jacobi_suite(&cfg).unwrap();
        assert!(r.checks.get("det_lower_bound").is_none());
        assert!(r.checks.get("trace_positive").is_none());
        assert!(r.checks.get("superharmonic_sign").is_none());
        assert!(r.checks.get("jacobi_excess").is_some());
    }

    #[test]
    fn reports_do_not_depend_on_threads() {
        let cfg = JacobiSuiteConfig::new(3, 1.0, 3 * CHUNK_SIZE + 17, 9);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_jacobi_suite(&cfg)).unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_jacobi_suite(&cfg)).unwrap();
        assert_eq!(one, four);
    }
}
