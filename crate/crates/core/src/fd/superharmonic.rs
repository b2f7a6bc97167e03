use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{LegendreImage, TransformConfig};
use crate::sym::{eigen_sym, elementary_symmetric, Matrix, SymmetricMatrix};
use crate::tolerances::MU_RANGE_SLACK;

/// `Δ_H a` on the transformed grid by two assemblies of `H_ij = σ_n(μ) G_ij`,
/// plus the pairing with the gradient of the polynomial `H`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperharmonicField {
    /// `(σ_n/σ_{n-1})^{1/3}` of the discrete Hessian of `w`.
    pub a: Vec<Option<f64>>,
    /// `Σ H_ij ∂_ij a` with `H = det W · W⁻¹((tr X) I - X) W⁻¹`, `X = W⁻¹ - K̄ I`.
    pub lap_h: Vec<Option<f64>>,
    /// `σ_n(μ) Σ_i g_i (∂²a)_ii` in the eigenbasis of `W`.
    pub lap_h_eigen: Vec<Option<f64>>,
    /// `Σ_i ∂H/∂μ_i (∂²a)_ii` for the polynomial `H`.
    pub lap_h_polynomial: Vec<Option<f64>>,
    /// `Σ |H_ij| |∂_ij a|`, the size of the terms summed.
    pub scale: Vec<Option<f64>>,
}

/// Inverse and determinant by cofactors (`n ≤ 3`).
fn inverse_small(w: &SymmetricMatrix) -> (Matrix, f64) {
    let n = w.dim();
    let g = |i, j| w.get(i, j);
    if n == 2 {
        let det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
        let inv = Matrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => g(1, 1) / det,
            (1, 1) => g(0, 0) / det,
            _ => -g(0, 1) / det,
        });
        return (inv, det);
    }
    let cof = |i: usize, j: usize| {
        let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
        let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
        let minor = g(r[0], c[0]) * g(r[1], c[1]) - g(r[0], c[1]) * g(r[1], c[0]);
        if (i + j) & 1 == 0 { minor } else { -minor }
    };
    let det = (0..3).map(|j| g(0, j) * cof(0, j)).sum::<f64>();
    (Matrix::from_fn(3, 3, |i, j| cof(j, i) / det), det)
}

pub fn superharmonicity_residual(img: &LegendreImage, cfg: &TransformConfig) -> Result<SuperharmonicField> {
    let w = &img.w;
    let n = w.n();
    if n != cfg.n {
        return Err(Error::Domain(format!("grid dimension {n} vs config n = {}", cfg.n)));
    }
    let a: Vec<Option<f64>> = (0..w.len())
        .into_par_iter()
        .map(|idx| {
            if !img.stencil_valid(idx) {
                return Ok(None);
            }
            let mu = eigen_sym(&w.hessian(idx))?;
            for &m in mu.values() {
                if !(m > -MU_RANGE_SLACK && m < 1.0 + MU_RANGE_SLACK) || m <= 0.0 {
                    return Err(Error::TransformConsistency { node: w.multi_index(idx), value: m });
                }
            }
            let e = elementary_symmetric(mu.values());
            Ok(Some((e[n] / e[n - 1]).cbrt()))
        })
        .collect::<Result<_>>()?;

    let a_ready = |idx: usize| {
        if !w.is_interior(idx) {
            return false;
        }
        let multi = w.multi_index(idx);
        (0..3usize.pow(n as u32)).all(|c| {
            let mut r = c;
            let nb: Vec<usize> = multi
                .iter()
                .map(|&i| {
                    let o = r % 3;
                    r /= 3;
                    i + o - 1
                })
                .collect();
            a[w.flat_index(&nb)].is_some()
        })
    };
    let a_vals: Vec<f64> = a.iter().map(|v| v.unwrap_or(0.0)).collect();

    type Row = (Option<f64>, Option<f64>, Option<f64>, Option<f64>);
    let rows: Vec<Row> = (0..w.len())
        .into_par_iter()
        .map(|idx| {
            if !a_ready(idx) {
                return Ok((None, None, None, None));
            }
            let hw = w.hessian(idx);
            let ha = w.hessian_of(&a_vals, idx);

            let (winv, det) = inverse_small(&hw);
            let x = Matrix::from_fn(n, n, |i, j| winv.get(i, j) - if i == j { cfg.kbar } else { 0.0 });
            let trx: f64 = (0..n).map(|i| x.get(i, i)).sum();
            let fx = Matrix::from_fn(n, n, |i, j| if i == j { trx } else { 0.0 } - x.get(i, j));
            let hm = winv.matmul(&fx).matmul(&winv);
            let mut direct = 0.0;
            let mut scale = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let t = det * hm.get(i, j) * ha.get(i, j);
                    direct += t;
                    scale += t.abs();
                }
            }

            let eig = eigen_sym(&hw)?;
            let mu = eig.values();
            let diag = ha.congruence(&eig.vectors)?;
            let sn = elementary_symmetric(mu)[n];
            let gg = cfg.g_gradient(mu);
            let hg = cfg.h_gradient(mu);
            let eigen_route = sn * (0..n).map(|i| gg[i] * diag.get(i, i)).sum::<f64>();
            let poly = (0..n).map(|i| hg[i] * diag.get(i, i)).sum::<f64>();
            Ok((Some(direct), Some(eigen_route), Some(poly), Some(scale)))
        })
        .collect::<Result<_>>()?;

    let mut out = SuperharmonicField {
        a,
        lap_h: Vec::with_capacity(rows.len()),
        lap_h_eigen: Vec::with_capacity(rows.len()),
        lap_h_polynomial: Vec::with_capacity(rows.len()),
        scale: Vec::with_capacity(rows.len()),
    };
    for (d, e, p, s) in rows {
        out.lap_h.push(d);
        out.lap_h_eigen.push(e);
        out.lap_h_polynomial.push(p);
        out.scale.push(s);
    }
    Ok(out)
}

/// Whether node `idx` of `w` is valid and lies in `[-f Y, f Y]ⁿ`.
pub fn in_sub_box(img: &LegendreImage, idx: usize, fraction: f64) -> bool {
    let lim = fraction * img.w.extent() * (1.0 + 1e-12);
    img.valid[idx] && img.w.point(idx).iter().all(|v| v.abs() <= lim)
}

impl SuperharmonicField {
    pub fn evaluated(&self) -> usize {
        self.lap_h.iter().filter(|v| v.is_some()).count()
    }

    /// Largest `|route 1 - route 2| / max(1, scale)`.
    pub fn proportionality_gap(&self) -> f64 {
        self.lap_h
            .iter()
            .zip(&self.lap_h_eigen)
            .zip(&self.scale)
            .filter_map(|((a, b), s)| Some((a.as_ref()? - b.as_ref()?).abs() / s.as_ref()?.max(1.0)))
            .fold(0.0, f64::max)
    }

    /// `max(0, Δ_H a)` over nodes in the `fraction` sub-box.
    pub fn positive_part(&self, img: &LegendreImage, fraction: f64) -> f64 {
        (0..self.lap_h.len())
            .filter(|&i| in_sub_box(img, i, fraction))
            .filter_map(|i| self.lap_h[i])
            .fold(0.0, f64::max)
    }

    /// Most negative value of `Δ_H a` over the same region.
    pub fn most_negative(&self, img: &LegendreImage, fraction: f64) -> f64 {
        (0..self.lap_h.len())
            .filter(|&i| in_sub_box(img, i, fraction))
            .filter_map(|i| self.lap_h[i])
            .fold(0.0, f64::min)
    }
}
