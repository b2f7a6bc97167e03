use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{isotropic_t, solve_dirichlet, Field, SolveOptions, SolveReport};
use super::superharmonic::in_sub_box;
use crate::error::{Error, Result};
use crate::grid::PotentialGrid;
use crate::legendre::{transform_grid, LegendreImage, TransformConfig};
use crate::tolerances::{NEWTON_MAX_ITER, NEWTON_TOLERANCE};

/// `t|x|²/2`, the isotropic solution.
pub fn quadratic_boundary(n: usize) -> impl Fn(&[f64]) -> f64 + Sync + Send + Copy {
    let t = isotropic_t(n);
    move |x: &[f64]| 0.5 * t * x.iter().map(|v| v * v).sum::<f64>()
}

/// `t|x|²/2 + 0.1 Π cos(x_k)`: a fixed perturbation, not rescaled with the box.
pub fn perturbed_boundary(n: usize) -> impl Fn(&[f64]) -> f64 + Sync + Send + Copy {
    let q = quadratic_boundary(n);
    move |x: &[f64]| q(x) + 0.1 * x.iter().map(|v| v.cos()).product::<f64>()
}

/// `t|x|²/2 + 0.1 Π cos(π x_k / R)` on `[-R, R]ⁿ`.
pub fn box_mode_boundary(n: usize, extent: f64) -> impl Fn(&[f64]) -> f64 + Sync + Send + Copy {
    let q = quadratic_boundary(n);
    let pi = std::f64::consts::PI;
    move |x: &[f64]| q(x) + 0.1 * x.iter().map(|v| (pi * v / extent).cos()).product::<f64>()
}

pub fn default_options(n: usize, m: usize, extent: f64, k: f64) -> SolveOptions {
    SolveOptions { n, m, extent, k, tol: NEWTON_TOLERANCE, max_iter: NEWTON_MAX_ITER }
}

/// Solve, then transform.
pub fn solve_and_transform(
    boundary: Field,
    opts: &SolveOptions,
    cfg: &TransformConfig,
) -> Result<(PotentialGrid, SolveReport, LegendreImage)> {
    let (u, report) = solve_dirichlet(boundary, opts)?;
    let img = transform_grid(&u, cfg)?;
    Ok((u, report, img))
}

/// Largest `max - min` of an entry of `D²_h w` over stencil-valid nodes of
/// the sub-box `[-f Y, f Y]ⁿ`.
pub fn hessian_oscillation(img: &LegendreImage, fraction: f64) -> f64 {
    let w = &img.w;
    let n = w.n();
    let mut lo = vec![f64::INFINITY; n * n];
    let mut hi = vec![f64::NEG_INFINITY; n * n];
    for idx in 0..w.len() {
        if !img.stencil_valid(idx) || !in_sub_box(img, idx, fraction) {
            continue;
        }
        let h = w.hessian(idx);
        for i in 0..n {
            for j in i..n {
                let v = h.get(i, j);
                lo[i * n + j] = lo[i * n + j].min(v);
                hi[i * n + j] = hi[i * n + j].max(v);
            }
        }
    }
    (0..n * n).filter(|&k| hi[k] >= lo[k]).map(|k| hi[k] - lo[k]).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub extent: f64,
    pub m: usize,
    pub osc: f64,
    pub iterations: usize,
    pub residual: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Minus the least-squares slope of `log osc` against `log R`.
    pub alpha_hat: Option<f64>,
    pub strictly_decreasing: bool,
    /// `(R, message)` for solves that failed; the rows above are the rest.
    pub failures: Vec<(f64, String)>,
}

fn fit_alpha(rows: &[ScalingRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.osc > 0.0).map(|r| (r.extent.ln(), r.osc.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

/// Solves on `[-R, R]ⁿ` for each `R`, transforms, and measures the
/// Hessian oscillation of `w` over the half-box of its domain.
pub fn scaling_experiment(boundary: Field, n: usize, extents: &[f64], m: usize, k: f64) -> Result<ScalingTable> {
    if extents.is_empty() || extents.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("box half-widths must be increasing".into()));
    }
    let cfg = TransformConfig::new(n, k, None)?;
    let results: Vec<std::result::Result<ScalingRow, (f64, String)>> = extents
        .par_iter()
        .map(|&r| {
            let opts = default_options(n, m, r, k);
            let (_, rep, img) = solve_and_transform(boundary, &opts, &cfg).map_err(|e| (r, e.to_string()))?;
            let nodes = (0..img.w.len()).filter(|&i| img.stencil_valid(i) && in_sub_box(&img, i, 0.5)).count();
            Ok(ScalingRow {
                extent: r,
                m,
                osc: hessian_oscillation(&img, 0.5),
                iterations: rep.iterations,
                residual: rep.residual,
                nodes,
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    let strictly_decreasing = failures.is_empty() && rows.windows(2).all(|w| w[1].osc < w[0].osc);
    Ok(ScalingTable { alpha_hat: fit_alpha(&rows), strictly_decreasing, rows, failures })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub level: usize,
    pub nodes: usize,
    pub a_min: f64,
    pub bad_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationTable {
    pub rows: Vec<ConcentrationRow>,
    /// Set when sub-boxes ran below five nodes per axis.
    pub truncated_at: Option<usize>,
}

/// For `k = 0..=levels`: the minimum `a_k` of `a` over `[-Y/2^k, Y/2^k]ⁿ`
/// and the fraction of nodes there with `a > a_k + ξ`.
pub fn concentration_diagnostic(w: &PotentialGrid, a: &[Option<f64>], xi: f64, levels: usize) -> Result<ConcentrationTable> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("xi = {xi} must be positive")));
    }
    if a.len() != w.len() {
        return Err(Error::Domain("field length does not match the grid".into()));
    }
    let mut rows = Vec::new();
    let mut truncated_at = None;
    for level in 0..=levels {
        let half = w.extent() / 2f64.powi(level as i32);
        let per_axis = (0..w.m()).filter(|&i| w.coord(i).abs() <= half + 1e-12 * w.extent()).count();
        if per_axis < 5 {
            truncated_at = Some(level);
            break;
        }
        let vals: Vec<f64> = (0..w.len())
            .filter(|&i| w.point(i).iter().all(|v| v.abs() <= half + 1e-12 * w.extent()))
            .filter_map(|i| a[i])
            .collect();
        if vals.is_empty() {
            truncated_at = Some(level);
            break;
        }
        let a_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let bad = vals.iter().filter(|&&v| v > a_min + xi).count();
        rows.push(ConcentrationRow { level, nodes: vals.len(), a_min, bad_fraction: bad as f64 / vals.len() as f64 });
    }
    Ok(ConcentrationTable { rows, truncated_at })
}
