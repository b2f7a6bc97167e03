use super::PotentialGrid;

/// Number of nodes per axis in the local Lagrange stencil.
const STENCIL: usize = 6;

/// Value, gradient and Hessian of the interpolant at a point.
#[derive(Debug, Clone)]
pub struct LocalJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `n×n`.
    pub hessian: Vec<f64>,
}

/// Tensor-product Lagrange interpolant on the six nodes around each coordinate.
#[derive(Debug, Clone, Copy)]
pub struct Interpolant<'a> {
    grid: &'a PotentialGrid,
}

struct Axis {
    start: usize,
    w: [[f64; STENCIL]; 3],
    len: usize,
}

impl<'a> Interpolant<'a> {
    pub fn new(grid: &'a PotentialGrid) -> Self {
        Self { grid }
    }

    fn axis(&self, x: f64, anchor: f64) -> Axis {
        let g = self.grid;
        let len = STENCIL.min(g.m());
        let h = g.h();
        let s = ((anchor + g.extent()) / h).floor() as isize - (len as isize / 2 - 1);
        let start = s.clamp(0, (g.m() - len) as isize) as usize;
        let t = (x - g.coord(start)) / h;
        let mut w = [[0.0; STENCIL]; 3];
        for j in 0..len {
            let mut denom = 1.0;
            for k in 0..len {
                if k != j {
                    denom *= j as f64 - k as f64;
                }
            }
            let others: Vec<f64> = (0..len).filter(|&k| k != j).map(|k| t - k as f64).collect();
            let prod_except = |skip: &[usize]| {
                others.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, v)| v).product::<f64>()
            };
            let value = prod_except(&[]);
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for a in 0..others.len() {
                d1 += prod_except(&[a]);
                for b in 0..others.len() {
                    if b != a {
                        d2 += prod_except(&[a, b]);
                    }
                }
            }
            w[0][j] = value / denom;
            w[1][j] = d1 / denom / h;
            w[2][j] = d2 / denom / (h * h);
        }
        Axis { start, w, len }
    }

    /// Evaluates at `x`; points outside the box are extrapolated.
    pub fn jet(&self, x: &[f64]) -> LocalJet {
        self.jet_anchored(x, x)
    }

    /// Evaluates the single polynomial piece selected by `anchor`. Pieces
    /// differ at the interpolation error, so iterations that must see one
    /// smooth function keep the anchor fixed.
    pub fn jet_anchored(&self, x: &[f64], anchor: &[f64]) -> LocalJet {
        let g = self.grid;
        let n = g.n();
        assert_eq!(x.len(), n);
        assert_eq!(anchor.len(), n);
        let axes: Vec<Axis> = x.iter().zip(anchor).map(|(&xi, &ai)| self.axis(xi, ai)).collect();
        let mut value = 0.0;
        let mut gradient = vec![0.0; n];
        let mut hessian = vec![0.0; n * n];
        let len = axes[0].len;
        let count = len.pow(n as u32);
        let mut multi = vec![0usize; n];
        for c in 0..count {
            let mut r = c;
            for a in (0..n).rev() {
                multi[a] = r % len;
                r /= len;
            }
            let node: usize = (0..n).map(|a| (axes[a].start + multi[a]) * g.stride(a)).sum();
            let v = g.values()[node];
            // Products of the per-axis weights with derivative orders `ord`.
            let weight = |ord: &[usize]| (0..n).map(|a| axes[a].w[ord[a]][multi[a]]).product::<f64>();
            let mut ord = vec![0usize; n];
            value += v * weight(&ord);
            for i in 0..n {
                ord[i] = 1;
                gradient[i] += v * weight(&ord);
                ord[i] = 0;
                for j in i..n {
                    ord[i] += 1;
                    ord[j] += 1;
                    let d = v * weight(&ord);
                    hessian[i * n + j] += d;
                    if j != i {
                        hessian[j * n + i] += d;
                    }
                    ord[i] -= 1;
                    ord[j] -= 1;
                }
            }
        }
        LocalJet { value, gradient, hessian }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.jet(x).value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quintic_polynomials() {
        let p = |x: &[f64]| x[0].powi(5) - 2.0 * x[0].powi(2) * x[1].powi(3) + x[1] - 0.5;
        let g = PotentialGrid::from_fn(2, 11, 1.5, p).unwrap();
        let it = g.interpolant();
        for pt in [[0.13, -0.77], [-1.5, 1.5], [1.41, 0.02], [0.0, 0.0]] {
            let j = it.jet(&pt);
            let (x, y) = (pt[0], pt[1]);
            assert!((j.value - p(&pt)).abs() < 1e-11);
            assert!((j.gradient[0] - (5.0 * x.powi(4) - 4.0 * x * y.powi(3))).abs() < 1e-10);
            assert!((j.gradient[1] - (-6.0 * x * x * y * y + 1.0)).abs() < 1e-10);
            assert!((j.hessian[0] - (20.0 * x.powi(3) - 4.0 * y.powi(3))).abs() < 1e-9);
            assert!((j.hessian[1] - (-12.0 * x * y * y)).abs() < 1e-9);
            assert_eq!(j.hessian[1], j.hessian[2]);
            assert!((j.hessian[3] - (-12.0 * x * x * y)).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_nodes_in_three_dimensions() {
        let g = PotentialGrid::from_fn(3, 7, 1.0, |x| (x[0] + 2.0 * x[1]).sin() * x[2].cos()).unwrap();
        let it = g.interpolant();
        for idx in [0, 17, 100, 342] {
            assert!((it.value(&g.point(idx)) - g.values()[idx]).abs() < 1e-13);
        }
    }

    #[test]
    fn smooth_function_error_is_high_order() {
        let f = |x: &[f64]| (x[0] * 1.3).sin() * (x[1] * 0.7).exp();
        let err = |m| {
            let g = PotentialGrid::from_fn(2, m, 1.0, f).unwrap();
            let it = g.interpolant();
            let pt = [0.3141, -0.2718];
            (it.value(&pt) - f(&pt)).abs()
        };
        let order = (err(17) / err(33)).log2();
        assert!(order > 5.0, "order {order}");
    }
}
