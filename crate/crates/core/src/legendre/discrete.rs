use rayon::prelude::*;

use super::TransformConfig;
use crate::error::{Error, Result};
use crate::grid::PotentialGrid;
use crate::sym::eigen_sym;

/// `G(y_j) = max_i (x_i y_j + ψ_i)` for ascending `xs` and `ys`, with the
/// maximizing index (lowest on ties). Linear time via the upper hull.
pub fn llt_max(xs: &[f64], psi: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<usize>) {
    debug_assert_eq!(xs.len(), psi.len());
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Drop b unless it lies strictly above the chord from a to i.
            let cross = (xs[b] - xs[a]) * (psi[i] - psi[a]) - (psi[b] - psi[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut vals = Vec::with_capacity(ys.len());
    let mut args = Vec::with_capacity(ys.len());
    let mut j = 0;
    for &y in ys {
        let at = |k: usize| xs[hull[k]] * y + psi[hull[k]];
        while j + 1 < hull.len() && at(j + 1) > at(j) {
            j += 1;
        }
        // Earlier queries can leave the pointer past a tie; back up to the lowest index.
        while j > 0 && at(j - 1) >= at(j) {
            j -= 1;
        }
        vals.push(at(j));
        args.push(hull[j]);
    }
    (vals, args)
}

/// Discrete conjugate `F(y) = max_x ⟨x, y⟩ - f(x)` over an `mⁿ` lattice,
/// one axis at a time, with per-pass argmax tables for backtracking.
struct SeparableConjugate {
    n: usize,
    m: usize,
    values: Vec<f64>,
    /// `args[a]` is indexed by the state after the pass over axis `a`.
    args: Vec<Vec<u32>>,
}

impl SeparableConjugate {
    fn compute(n: usize, m: usize, src: &[f64], dst: &[f64], f: &[f64]) -> Self {
        let len = m.pow(n as u32);
        let stride = |a: usize| m.pow((n - 1 - a) as u32);
        let mut psi: Vec<f64> = f.iter().map(|v| -v).collect();
        let mut args = vec![Vec::new(); n];
        for a in (0..n).rev() {
            let s = stride(a);
            let starts: Vec<usize> = (0..len).filter(|i| (i / s) % m == 0).collect();
            let lines: Vec<(Vec<f64>, Vec<usize>)> = starts
                .par_iter()
                .map(|&st| {
                    let line: Vec<f64> = (0..m).map(|k| psi[st + k * s]).collect();
                    llt_max(src, &line, dst)
                })
                .collect();
            let mut next = vec![0.0; len];
            let mut arg = vec![0u32; len];
            for (&st, (vals, am)) in starts.iter().zip(lines) {
                for k in 0..m {
                    next[st + k * s] = vals[k];
                    arg[st + k * s] = am[k] as u32;
                }
            }
            psi = next;
            args[a] = arg;
        }
        Self { n, m, values: psi, args }
    }

    fn argmax(&self, idx: usize) -> Vec<usize> {
        let (n, m) = (self.n, self.m);
        let stride = |a: usize| m.pow((n - 1 - a) as u32);
        let mut cur: Vec<usize> = (0..n).map(|a| (idx / stride(a)) % m).collect();
        for a in 0..n {
            let flat: usize = cur.iter().enumerate().map(|(b, &i)| i * stride(b)).sum();
            cur[a] = self.args[a][flat] as usize;
        }
        cur
    }
}

/// The transformed potential on `[-Y, Y]ⁿ`.
#[derive(Debug, Clone)]
pub struct LegendreImage {
    pub w: PotentialGrid,
    /// Nodes whose refined preimage converged inside the source box.
    pub valid: Vec<bool>,
    /// Refined preimage `x*` of every node.
    pub preimage: Vec<Vec<f64>>,
    /// Plain lattice maximum before refinement.
    pub discrete: Vec<f64>,
    /// `ũ = u + K̄|x|²/2` on the source lattice.
    pub u_tilde: PotentialGrid,
}

impl LegendreImage {
    /// Valid nodes whose whole `3ⁿ` neighbourhood is valid.
    pub fn stencil_valid(&self, idx: usize) -> bool {
        if !self.w.is_interior(idx) {
            return false;
        }
        let n = self.w.n();
        let multi = self.w.multi_index(idx);
        let mut off = vec![0usize; n];
        for c in 0..3usize.pow(n as u32) {
            let mut r = c;
            for o in off.iter_mut() {
                *o = r % 3;
                r /= 3;
            }
            let nb: Vec<usize> = multi.iter().zip(&off).map(|(&i, &o)| i + o - 1).collect();
            if !self.valid[self.w.flat_index(&nb)] {
                return false;
            }
        }
        true
    }
}

fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if a[p * n + col] == 0.0 {
            return false;
        }
        if p != col {
            for k in 0..n {
                a.swap(p * n + k, col * n + k);
            }
            b.swap(p, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r * n + k] * b[k];
        }
        b[r] = s / a[r * n + r];
    }
    true
}

const POLISH_ITERATIONS: usize = 40;

/// Solves `∇ũ(x) = y` by Newton from the node `x0` on the interpolant piece
/// anchored there; `None` if it leaves the box or stalls.
fn polish(u: &PotentialGrid, y: &[f64], x0: &[f64]) -> Option<(Vec<f64>, f64)> {
    let it = u.interpolant();
    let n = u.n();
    let r = u.extent();
    let slack = 1e-9 * r;
    let mut x = x0.to_vec();
    for _ in 0..POLISH_ITERATIONS {
        let jet = it.jet_anchored(&x, x0);
        let mut g: Vec<f64> = (0..n).map(|k| jet.gradient[k] - y[k]).collect();
        let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let res = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res <= 1e-13 * scale {
            return x.iter().all(|v| v.abs() <= r + slack).then_some((x, jet.value));
        }
        let mut h = jet.hessian.clone();
        if !solve_small(&mut h, &mut g, n) {
            return None;
        }
        for k in 0..n {
            x[k] -= g[k];
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > r + 4.0 * u.h()) {
            return None;
        }
    }
    // Accept a stall at rounding level.
    let jet = it.jet_anchored(&x, x0);
    let res = (0..n).map(|k| (jet.gradient[k] - y[k]).abs()).fold(0.0, f64::max);
    let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    (res <= 1e-10 * scale && x.iter().all(|v| v.abs() <= r + slack)).then_some((x, jet.value))
}

/// Legendre transform of `ũ = u + K̄|x|²/2` after checking its discrete convexity.
pub fn transform_grid(u: &PotentialGrid, cfg: &TransformConfig) -> Result<LegendreImage> {
    if u.n() != cfg.n {
        return Err(Error::Domain(format!("grid dimension {} vs config n = {}", u.n(), cfg.n)));
    }
    let (n, m) = (u.n(), u.m());
    let ut_vals: Vec<f64> = (0..u.len())
        .map(|i| u.values()[i] + 0.5 * cfg.kbar * u.point(i).iter().map(|x| x * x).sum::<f64>())
        .collect();
    let u_tilde = u.with_values(ut_vals)?;
    for idx in u_tilde.interior_indices() {
        let lo = eigen_sym(&u_tilde.hessian(idx))?.values()[0];
        if !(lo > 0.0) {
            return Err(Error::Convexity { node: u_tilde.multi_index(idx), min_eigenvalue: lo });
        }
    }
    let it = u_tilde.interpolant();
    let big_y = (0..u.len())
        .into_par_iter()
        .map(|i| it.jet(&u_tilde.point(i)).gradient.iter().map(|v| v.abs()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    let w0 = PotentialGrid::new(n, m, big_y, vec![0.0; u.len()])?;
    let src: Vec<f64> = (0..m).map(|i| u.coord(i)).collect();
    let dst: Vec<f64> = (0..m).map(|i| w0.coord(i)).collect();
    let conj = SeparableConjugate::compute(n, m, &src, &dst, u_tilde.values());

    let refined: Vec<(f64, bool, Vec<f64>)> = (0..w0.len())
        .into_par_iter()
        .map(|idx| {
            let y = w0.point(idx);
            let x0: Vec<f64> = conj.argmax(idx).into_iter().map(|i| src[i]).collect();
            match polish(&u_tilde, &y, &x0) {
                Some((x, ux)) => {
                    let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                    (dot - ux, true, x)
                }
                None => (conj.values[idx], false, x0),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(refined.len());
    let mut valid = Vec::with_capacity(refined.len());
    let mut preimage = Vec::with_capacity(refined.len());
    for (v, ok, x) in refined {
        values.push(v);
        valid.push(ok);
        preimage.push(x);
    }
    Ok(LegendreImage { w: w0.with_values(values)?, valid, preimage, discrete: conj.values, u_tilde })
}

/// `max |w^* - ũ|` over the source lattice, with `w^*` the lattice conjugate of `w`.
pub fn involution_gap(image: &LegendreImage) -> f64 {
    let w = &image.w;
    let ut = &image.u_tilde;
    let m = w.m();
    let src: Vec<f64> = (0..m).map(|i| w.coord(i)).collect();
    let dst: Vec<f64> = (0..m).map(|i| ut.coord(i)).collect();
    let back = SeparableConjugate::compute(w.n(), m, &src, &dst, w.values());
    back.values.iter().zip(ut.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn llt_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let k = rng.random_range(1..40);
            let mut xs: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let psi: Vec<f64> = xs.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            let ys: Vec<f64> = (0..30).map(|j| -4.0 + j as f64 * 8.0 / 29.0).collect();
            let (vals, args) = llt_max(&xs, &psi, &ys);
            for (j, &y) in ys.iter().enumerate() {
                let (bi, bv) = xs
                    .iter()
                    .zip(&psi)
                    .map(|(x, p)| x * y + p)
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
                assert_eq!(vals[j], bv);
                assert_eq!(args[j], bi);
            }
        }
    }

    #[test]
    fn separable_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=3 {
            let m: usize = 6;
            let len = m.pow(n as u32);
            let f: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let src: Vec<f64> = (0..m).map(|i| -1.0 + 0.4 * i as f64).collect();
            let dst: Vec<f64> = (0..m).map(|i| -2.0 + 0.8 * i as f64).collect();
            let conj = SeparableConjugate::compute(n, m, &src, &dst, &f);
            let multi = |idx: usize| -> Vec<usize> { (0..n).map(|a| (idx / m.pow((n - 1 - a) as u32)) % m).collect() };
            for yi in 0..len {
                let y: Vec<f64> = multi(yi).into_iter().map(|i| dst[i]).collect();
                let mut best = f64::NEG_INFINITY;
                for xi in 0..len {
                    let x: Vec<f64> = multi(xi).into_iter().map(|i| src[i]).collect();
                    best = best.max(x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - f[xi]);
                }
                assert!((conj.values[yi] - best).abs() < 1e-12);
                let am: Vec<f64> = conj.argmax(yi).into_iter().map(|i| src[i]).collect();
                let flat: usize = conj.argmax(yi).iter().enumerate().map(|(a, &i)| i * m.pow((n - 1 - a) as u32)).sum();
                let at = am.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - f[flat];
                assert!((at - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_transforms() {
        let a = [[0.8, 0.3], [0.3, -0.5]];
        let cfg = TransformConfig::new(2, 1.0, None).unwrap();
        for (case, coef) in [[[1.0, 0.0], [0.0, 1.0]], a].iter().enumerate() {
            let u = PotentialGrid::from_fn(2, 33, 1.0, |x| {
                0.5 * (coef[0][0] * x[0] * x[0] + 2.0 * coef[0][1] * x[0] * x[1] + coef[1][1] * x[1] * x[1])
            })
            .unwrap();
            let img = transform_grid(&u, &cfg).unwrap();
            let b = [[coef[0][0] + cfg.kbar, coef[0][1]], [coef[0][1], coef[1][1] + cfg.kbar]];
            let det = b[0][0] * b[1][1] - b[0][1] * b[0][1];
            let inv = [[b[1][1] / det, -b[0][1] / det], [-b[0][1] / det, b[0][0] / det]];
            let mut checked = 0;
            for idx in 0..img.w.len() {
                if !img.valid[idx] {
                    continue;
                }
                let y = img.w.point(idx);
                let exact = 0.5 * (inv[0][0] * y[0] * y[0] + 2.0 * inv[0][1] * y[0] * y[1] + inv[1][1] * y[1] * y[1]);
                assert!((img.w.values()[idx] - exact).abs() < 1e-11, "case {case}");
                checked += 1;
            }
            assert!(checked > img.w.len() / 4, "case {case}: {checked} valid nodes");
        }
    }

    fn smooth_u(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>() + 0.1 * (x[0] * 1.3).cos() * (x[1] * 0.9 + 0.2).sin()
    }

    #[test]
    fn involution_gap_shrinks() {
        let cfg = TransformConfig::new(2, 1.0, None).unwrap();
        let gap = |m| {
            let u = PotentialGrid::from_fn(2, m, 1.0, smooth_u).unwrap();
            let img = transform_grid(&u, &cfg).unwrap();
            (involution_gap(&img), u.h())
        };
        let (g1, h1) = gap(17);
        let (g2, h2) = gap(33);
        assert!(g1 <= 2.0 * h1 && g2 <= 2.0 * h2, "{g1} {g2}");
        assert!(g2 < g1);
    }

    #[test]
    fn hessian_relation() {
        let cfg = TransformConfig::new(2, 1.0, None).unwrap();
        let err = |m| {
            let u = PotentialGrid::from_fn(2, m, 1.0, smooth_u).unwrap();
            let img = transform_grid(&u, &cfg).unwrap();
            let it = img.u_tilde.interpolant();
            let mut e: f64 = 0.0;
            for idx in 0..img.w.len() {
                if !img.stencil_valid(idx) {
                    continue;
                }
                let jet = it.jet(&img.preimage[idx]);
                let h = &jet.hessian;
                let det = h[0] * h[3] - h[1] * h[2];
                let inv = [h[3] / det, -h[1] / det, h[0] / det];
                let d = img.w.hessian(idx);
                e = e.max((d.get(0, 0) - inv[0]).abs()).max((d.get(0, 1) - inv[1]).abs()).max((d.get(1, 1) - inv[2]).abs());
            }
            e
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e2 < 0.5 * e1 && e2 < 1e-3, "{e1} {e2}");
    }

    #[test]
    fn gradient_map_is_monotone() {
        let cfg = TransformConfig::new(2, 1.0, None).unwrap();
        let u = PotentialGrid::from_fn(2, 17, 1.0, smooth_u).unwrap();
        let img = transform_grid(&u, &cfg).unwrap();
        let it = img.u_tilde.interpolant();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let (i, j) = (rng.random_range(0..u.len()), rng.random_range(0..u.len()));
            if i == j {
                continue;
            }
            let (xi, xj) = (u.point(i), u.point(j));
            let (yi, yj) = (it.jet(&xi).gradient, it.jet(&xj).gradient);
            let dot: f64 = (0..2).map(|k| (yi[k] - yj[k]) * (xi[k] - xj[k])).sum();
            assert!(dot > 0.0);
        }
    }

    #[test]
    fn non_convex_input_is_rejected() {
        let cfg = TransformConfig::new(2, 1.0, Some(1.5)).unwrap();
        let u = PotentialGrid::from_fn(2, 9, 1.0, |x| -(x[0] * x[0]) + x[1] * x[1]).unwrap();
        match transform_grid(&u, &cfg) {
            Err(Error::Convexity { min_eigenvalue, .. }) => assert!(min_eigenvalue < 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn three_dimensional_quadratic() {
        let cfg = TransformConfig::new(3, 1.0, None).unwrap();
        let u = PotentialGrid::from_fn(3, 13, 1.0, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap();
        let img = transform_grid(&u, &cfg).unwrap();
        let mut count = 0;
        for idx in 0..img.w.len() {
            if img.valid[idx] {
                let y = img.w.point(idx);
                let exact = y.iter().map(|v| v * v).sum::<f64>() / (2.0 * (1.0 + cfg.kbar));
                assert!((img.w.values()[idx] - exact).abs() < 1e-11);
                count += 1;
            }
        }
        assert!(count > 0);
    }
}
