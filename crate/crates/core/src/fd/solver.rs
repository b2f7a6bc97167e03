use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{solve, LinearBackend, SparseMatrix};
use crate::error::{Error, Result};
use crate::grid::PotentialGrid;
use crate::sigma2::{evaluate_f, Branch};
use crate::sym::eigen_sym;
use crate::tolerances::{BRANCH_TRACE_FLOOR, NEWTON_DAMPING_FLOOR};

pub type Field<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Isotropic solution `t|x|²/2` of `σ₂ = 1`, `t = √(2/(n(n-1)))`.
pub fn isotropic_t(n: usize) -> f64 {
    (2.0 / (n * (n - 1)) as f64).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub n: usize,
    pub m: usize,
    pub extent: f64,
    /// Semiconvexity constant used in the reported `min eig(D²u + K I)`.
    pub k: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `max |σ₂(D²_h u) - g|` over interior nodes of the returned field.
    pub residual: f64,
    /// Residual before each iteration and after the last.
    pub history: Vec<f64>,
    pub min_shifted_eigenvalue: f64,
    pub branch: Branch,
    pub projections: usize,
    /// Rows with a negative off-diagonal coefficient, summed over iterates.
    pub monotonicity_violations: usize,
    pub backend: Option<LinearBackend>,
}

/// Interior unknowns in row-major order.
struct Layout {
    grid: PotentialGrid,
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl Layout {
    fn new(opts: &SolveOptions) -> Result<Self> {
        let grid = PotentialGrid::new(opts.n, opts.m, opts.extent, vec![0.0; opts.m.pow(opts.n as u32)])?;
        let interior = grid.interior_indices();
        let mut slot = vec![None; grid.len()];
        for (k, &i) in interior.iter().enumerate() {
            slot[i] = Some(k);
        }
        Ok(Self { grid, interior, slot })
    }

    /// Row of `Σ_kl C_kl ∂_kl` at grid node `idx`, with boundary columns dropped.
    fn stencil_row(&self, idx: usize, c: &[f64], row: &mut Vec<(usize, f64)>) -> bool {
        let g = &self.grid;
        let n = g.n();
        let h2 = g.h() * g.h();
        let mut negative = false;
        let mut put = |node: usize, v: f64, off: bool| {
            if off && v < 0.0 {
                negative = true;
            }
            if let Some(s) = self.slot[node] {
                row.push((s, v));
            }
        };
        for k in 0..n {
            let sk = g.stride(k);
            let ckk = c[k * n + k] / h2;
            put(idx + sk, ckk, true);
            put(idx - sk, ckk, true);
            put(idx, -2.0 * ckk, false);
            for l in k + 1..n {
                let sl = g.stride(l);
                let v = 2.0 * c[k * n + l] / (4.0 * h2);
                put(idx + sk + sl, v, true);
                put(idx - sk - sl, v, true);
                put(idx + sk - sl, -v, true);
                put(idx - sk + sl, -v, true);
            }
        }
        negative
    }

    fn residual(&self, u: &[f64], rhs: &[f64]) -> Vec<f64> {
        self.interior
            .par_iter()
            .zip(rhs.par_iter())
            .map(|(&i, g)| evaluate_f(&self.grid.hessian_of(u, i)) - g)
            .collect()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Discrete harmonic function with the given boundary values.
fn harmonic_extension(layout: &Layout, boundary: &[f64]) -> Result<Vec<f64>> {
    let n = layout.grid.n();
    let mut id = vec![0.0; n * n];
    for k in 0..n {
        id[k * n + k] = 1.0;
    }
    let mut a = SparseMatrix::new(layout.interior.len());
    let mut rhs = vec![0.0; layout.interior.len()];
    let mut row = Vec::new();
    for (r, &idx) in layout.interior.iter().enumerate() {
        layout.stencil_row(idx, &id, &mut row);
        // Boundary neighbours move to the right-hand side.
        let g = &layout.grid;
        let h2 = g.h() * g.h();
        for k in 0..n {
            let sk = g.stride(k);
            for nb in [idx + sk, idx - sk] {
                if layout.slot[nb].is_none() {
                    rhs[r] -= boundary[nb] / h2;
                }
            }
        }
        a.push_row(&mut row);
    }
    let (x, _) = solve(&a, &rhs)?;
    let mut out = boundary.to_vec();
    for (k, &idx) in layout.interior.iter().enumerate() {
        out[idx] = x[k];
    }
    Ok(out)
}

/// Newton's method for `σ₂(D²_h u) = 1` with Dirichlet data.
pub fn solve_dirichlet(boundary: Field, opts: &SolveOptions) -> Result<(PotentialGrid, SolveReport)> {
    solve_general(boundary, None, opts)
}

/// Same scheme for `σ₂(D²_h u) = g`; used to test the discretization.
pub fn solve_dirichlet_rhs(boundary: Field, rhs: Field, opts: &SolveOptions) -> Result<(PotentialGrid, SolveReport)> {
    solve_general(boundary, Some(rhs), opts)
}

fn solve_general(boundary: Field, rhs: Option<Field>, opts: &SolveOptions) -> Result<(PotentialGrid, SolveReport)> {
    let layout = Layout::new(opts)?;
    let g = &layout.grid;
    let n = g.n();
    let rhs_vals: Vec<f64> = layout.interior.iter().map(|&i| rhs.map_or(1.0, |f| f(&g.point(i)))).collect();

    let t = isotropic_t(n);
    let quad = |x: &[f64]| 0.5 * t * x.iter().map(|v| v * v).sum::<f64>();
    let diff: Vec<f64> = (0..g.len())
        .map(|i| if layout.slot[i].is_none() { let x = g.point(i); boundary(&x) - quad(&x) } else { 0.0 })
        .collect();
    let ext = harmonic_extension(&layout, &diff)?;
    let mut u: Vec<f64> = (0..g.len()).map(|i| quad(&g.point(i)) + ext[i]).collect();

    let mut report = SolveReport {
        iterations: 0,
        residual: f64::NAN,
        history: Vec::new(),
        min_shifted_eigenvalue: f64::NAN,
        branch: Branch::PositiveTrace,
        projections: 0,
        monotonicity_violations: 0,
        backend: None,
    };
    let mut res = layout.residual(&u, &rhs_vals);
    let mut norm = max_abs(&res);
    report.history.push(norm);
    while norm > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations: report.iterations,
                reason: format!("residual {norm:e} above {:e}", opts.tol),
                history: report.history,
            });
        }
        report.projections += keep_branch(&layout, &mut u)?;
        if report.projections > 0 {
            res = layout.residual(&u, &rhs_vals);
            norm = max_abs(&res);
        }
        let mut a = SparseMatrix::new(layout.interior.len());
        let mut row = Vec::new();
        for &idx in &layout.interior {
            let hess = g.hessian_of(&u, idx);
            let tr = hess.trace();
            let mut c = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] = if i == j { tr } else { 0.0 } - hess.get(i, j);
                }
            }
            if layout.stencil_row(idx, &c, &mut row) {
                report.monotonicity_violations += 1;
            }
            a.push_row(&mut row);
        }
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let (step, backend) = solve(&a, &neg)?;
        report.backend = Some(backend);

        let mut alpha = 1.0;
        loop {
            let mut trial = u.clone();
            for (k, &idx) in layout.interior.iter().enumerate() {
                trial[idx] += alpha * step[k];
            }
            let tres = layout.residual(&trial, &rhs_vals);
            let tnorm = max_abs(&tres);
            if tnorm < norm {
                u = trial;
                res = tres;
                norm = tnorm;
                break;
            }
            alpha *= 0.5;
            if alpha < NEWTON_DAMPING_FLOOR {
                return Err(Error::NonConvergence {
                    iterations: report.iterations,
                    reason: "line search fell below the damping floor".into(),
                    history: report.history,
                });
            }
        }
        report.iterations += 1;
        report.history.push(norm);
    }

    let field = g.with_values(u)?;
    let mut min_shift = f64::INFINITY;
    let mut min_trace = f64::INFINITY;
    for &idx in &layout.interior {
        let hess = field.hessian(idx);
        min_trace = min_trace.min(hess.trace());
        min_shift = min_shift.min(eigen_sym(&hess)?.values()[0] + opts.k);
    }
    report.residual = max_abs(&layout.residual(field.values(), &rhs_vals));
    report.min_shifted_eigenvalue = min_shift;
    report.branch = Branch::of_trace(min_trace);
    Ok((field, report))
}

/// Lifts the iterate by `c·(max_k x_k² - R²)`, which vanishes on the boundary,
/// until every interior trace clears the floor; then checks ellipticity.
fn keep_branch(layout: &Layout, u: &mut [f64]) -> Result<usize> {
    let g = &layout.grid;
    let r2 = g.extent() * g.extent();
    let phi: Vec<f64> = (0..g.len())
        .map(|i| g.point(i).iter().map(|v| v * v).fold(0.0, f64::max) - r2)
        .collect();
    let mut projections = 0;
    for _ in 0..8 {
        let mut c: f64 = 0.0;
        for &idx in &layout.interior {
            let tr = g.hessian_of(u, idx).trace();
            if tr < BRANCH_TRACE_FLOOR {
                let lift = g.hessian_of(&phi, idx).trace();
                c = c.max((BRANCH_TRACE_FLOOR + 0.1 - tr) / lift.max(1e-3));
            }
        }
        if c == 0.0 {
            break;
        }
        for (v, p) in u.iter_mut().zip(&phi) {
            *v += c * p;
        }
        projections += 1;
    }
    for &idx in &layout.interior {
        let hess = g.hessian_of(u, idx);
        let top = *eigen_sym(&hess)?.values().last().unwrap();
        let f_min = hess.trace() - top;
        if !(f_min > 0.0) {
            return Err(Error::BranchLoss { node: g.multi_index(idx), value: f_min });
        }
    }
    Ok(projections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::SymmetricMatrix;

    fn opts(n: usize, m: usize, extent: f64) -> SolveOptions {
        SolveOptions { n, m, extent, k: 1.0, tol: 1e-11, max_iter: 30 }
    }

    #[test]
    fn quadratic_is_reproduced() {
        for n in 2..=3 {
            let t = isotropic_t(n);
            let quad = move |x: &[f64]| 0.5 * t * x.iter().map(|v| v * v).sum::<f64>();
            let (u, rep) = solve_dirichlet(&quad, &opts(n, 9, 1.0)).unwrap();
            assert!(rep.iterations <= 2);
            for i in 0..u.len() {
                assert!((u.values()[i] - quad(&u.point(i))).abs() < 1e-10);
            }
            assert_eq!(rep.branch, Branch::PositiveTrace);
        }
    }

    #[test]
    fn perturbed_problem_converges_superlinearly() {
        let r = 2.0;
        let pi = std::f64::consts::PI;
        let b = move |x: &[f64]| {
            0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.1 * (pi * x[0] / r).cos() * (pi * x[1] / r).cos()
        };
        let (_, rep) = solve_dirichlet(&b, &opts(2, 33, r)).unwrap();
        assert!(rep.residual <= 1e-11);
        let h = &rep.history;
        assert!(h.len() >= 3);
        let ratios: Vec<f64> = h.windows(2).map(|w| w[1] / w[0]).collect();
        let k = ratios.len();
        assert!(ratios[k - 1] < ratios[0] && ratios[k - 1] < 0.1, "{ratios:?}");
        assert!(rep.monotonicity_violations > 0);
    }

    #[test]
    fn linearization_matches_directional_derivative() {
        let layout = Layout::new(&opts(2, 11, 1.0)).unwrap();
        let g = &layout.grid;
        let u: Vec<f64> = (0..g.len()).map(|i| {
            let x = g.point(i);
            0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.2 * (x[0] * 1.7).sin() * x[1]
        }).collect();
        let v: Vec<f64> = (0..g.len()).map(|i| {
            let x = g.point(i);
            (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (x[0] - 0.3 * x[1]).cos()
        }).collect();
        let s = 1e-6;
        let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + s * b).collect();
        let mut row = Vec::new();
        for &idx in &layout.interior {
            let hess = g.hessian_of(&u, idx);
            let tr = hess.trace();
            let c = [tr - hess.get(0, 0), -hess.get(0, 1), -hess.get(1, 0), tr - hess.get(1, 1)];
            layout.stencil_row(idx, &c, &mut row);
            let lin: f64 = row.iter().map(|&(k, w)| w * v[layout.interior[k]]).sum();
            row.clear();
            let fd = (evaluate_f(&g.hessian_of(&up, idx)) - evaluate_f(&g.hessian_of(&u, idx))) / s;
            assert!((lin - fd).abs() <= 1e-5 * lin.abs().max(1.0), "{lin} {fd}");
        }
    }

    fn manufactured(x: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.1 * x[0].sin() * (0.8 * x[1]).sin() + 0.05 * x[0] * x[1] * x[1]
    }

    fn manufactured_rhs(x: &[f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        let uxx = 1.0 - 0.1 * a.sin() * (0.8 * b).sin();
        let uyy = 1.0 - 0.064 * a.sin() * (0.8 * b).sin() + 0.1 * a;
        let uxy = 0.08 * a.cos() * (0.8 * b).cos() + 0.1 * b;
        let h = SymmetricMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => uxx,
            (1, 1) => uyy,
            _ => uxy,
        })
        .unwrap();
        evaluate_f(&h)
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        let err = |m| {
            let (u, _) = solve_dirichlet_rhs(&manufactured, &manufactured_rhs, &opts(2, m, 1.0)).unwrap();
            (0..u.len()).map(|i| (u.values()[i] - manufactured(&u.point(i))).abs()).fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(17), err(33), err(65));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!((1.9..=2.1).contains(&o2), "orders {o1} {o2}");
    }

    #[test]
    fn branch_loss_is_reported() {
        // A saddle boundary cannot be matched on the convex branch in 2D.
        let saddle = |x: &[f64]| 3.0 * (x[0] * x[0] - x[1] * x[1]);
        let r = solve_dirichlet(&saddle, &opts(2, 9, 1.0));
        assert!(matches!(r, Err(Error::BranchLoss { .. }) | Err(Error::NonConvergence { .. })), "{r:?}");
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let b = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.1 * (3.0 * x[0]).cos();
        let mut o = opts(2, 17, 1.0);
        o.max_iter = 1;
        match solve_dirichlet(&b, &o) {
            Err(Error::NonConvergence { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
