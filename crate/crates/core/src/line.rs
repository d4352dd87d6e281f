//! Graded grids on a symmetric interval of the line, C¹ cubic Hermite
//! interpolation with fourth-order nodal derivatives, and the collocation
//! matrix of `I_1` obtained by integrating the kernel exactly against the
//! piecewise cubic interpolant (product integration).

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::quad::{gauss_legendre, integrate_breaks, Tolerance};

/// Strictly increasing nodes on `[-half_width, half_width]`, symmetric about 0
/// with a node at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    nodes: Vec<f64>,
}

impl LineGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 5 {
            return invalid("line grid needs at least 5 nodes");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("line grid nodes must be strictly increasing");
        }
        Ok(Self { nodes })
    }

    /// `ξ(s) = Ξ sinh(b s) / sinh(b)` on uniform `s ∈ [-1, 1]` with `m` (odd)
    /// nodes; `b` is chosen so the spacing at the origin is
    /// `core_fraction · Ξ / m`.
    pub fn sinh_graded(half_width: f64, m: usize, core_fraction: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return invalid("half width must be positive");
        }
        if m < 5 {
            return invalid("need at least 5 nodes");
        }
        let m = if m.is_multiple_of(2) { m + 1 } else { m };
        let ds = 2.0 / (m - 1) as f64;
        let target = core_fraction * half_width / m as f64;
        // spacing at 0 is Ξ b ds / sinh(b), decreasing in b
        let spacing = |b: f64| half_width * b * ds / b.sinh();
        let uniform = half_width * ds;
        let nodes = if target >= uniform {
            (0..m).map(|k| -half_width + k as f64 * uniform).collect()
        } else {
            let (mut lo, mut hi) = (1e-6, 1.0);
            while spacing(hi) > target {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if spacing(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let b = 0.5 * (lo + hi);
            let mut nodes: Vec<f64> = (0..m)
                .map(|k| {
                    let s = -1.0 + k as f64 * ds;
                    half_width * (b * s).sinh() / b.sinh()
                })
                .collect();
            nodes[(m - 1) / 2] = 0.0;
            nodes[0] = -half_width;
            nodes[m - 1] = half_width;
            // enforce exact symmetry
            for k in 0..(m - 1) / 2 {
                let v = 0.5 * (nodes[m - 1 - k] - nodes[k]);
                nodes[k] = -v;
                nodes[m - 1 - k] = v;
            }
            nodes
        };
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index of the node at (or nearest to) zero.
    pub fn center_index(&self) -> usize {
        let mut best = 0;
        for (k, x) in self.nodes.iter().enumerate() {
            if x.abs() < self.nodes[best].abs() {
                best = k;
            }
        }
        best
    }

    /// Interval index `k` with `x_k <= s <= x_{k+1}` (clamped to the grid).
    pub fn locate(&self, s: f64) -> usize {
        let n = self.nodes.len();
        let p = self.nodes.partition_point(|&x| x <= s);
        p.clamp(1, n - 1) - 1
    }

    pub fn spacing_at_origin(&self) -> f64 {
        let c = self.center_index();
        self.nodes[c + 1] - self.nodes[c]
    }

    /// Fourth-order first-derivative stencils: `(start, weights)` per node.
    pub fn derivative_stencils(&self) -> Vec<(usize, [f64; 5])> {
        let n = self.nodes.len();
        (0..n)
            .map(|k| {
                let start = k.saturating_sub(2).min(n - 5);
                let w = fornberg(self.nodes[k], &self.nodes[start..start + 5], 1);
                let mut out = [0.0; 5];
                out.copy_from_slice(&w[1]);
                (start, out)
            })
            .collect()
    }

    /// Nodal derivatives from the fourth-order stencils.
    pub fn derivatives(&self, values: &[f64]) -> Vec<f64> {
        self.derivative_stencils()
            .iter()
            .map(|(s, w)| (0..5).map(|j| w[j] * values[s + j]).sum())
            .collect()
    }

    /// Weights `w` with `Σ w_j f_j = ∫_{x_0}^{x_{m-1}} H[f]`, `H` the Hermite
    /// interpolant built from [`Self::derivatives`].
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        let mut wd = vec![0.0; n];
        for k in 0..n - 1 {
            let h = self.nodes[k + 1] - self.nodes[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
            wd[k] += h * h / 12.0;
            wd[k + 1] -= h * h / 12.0;
        }
        for (k, (s, st)) in self.derivative_stencils().into_iter().enumerate() {
            for j in 0..5 {
                w[s + j] += wd[k] * st[j];
            }
        }
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.quadrature_weights()
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .sum()
    }
}

/// Fornberg's weights for derivatives `0..=order` at `x0` from `nodes`.
pub fn fornberg(x0: f64, nodes: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Cubic Hermite basis on the unit interval: value and first two derivatives
/// (with respect to `t`).
#[inline]
pub fn hermite_basis(t: f64) -> [[f64; 4]; 3] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        [2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2],
        [6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t],
        [12.0 * t - 6.0, 6.0 * t - 4.0, -12.0 * t + 6.0, 6.0 * t - 2.0],
    ]
}

/// Evaluates a Hermite interpolant (`order` 0, 1 or 2) at `s` inside the grid.
pub fn hermite_eval(grid: &LineGrid, values: &[f64], derivs: &[f64], s: f64, order: usize) -> f64 {
    let nodes = grid.nodes();
    let k = grid.locate(s);
    let h = nodes[k + 1] - nodes[k];
    let t = (s - nodes[k]) / h;
    let b = hermite_basis(t)[order.min(2)];
    let raw = b[0] * values[k] + b[1] * h * derivs[k] + b[2] * values[k + 1] + b[3] * h * derivs[k + 1];
    raw / h.powi(order as i32)
}

/// Far-field law of a function beyond the grid ends.
pub trait TailLaw {
    /// Function value at `s` for `s` beyond the grid on either side.
    fn tail_value(&self, s: f64) -> f64;
}

/// The zero tail (`ψ(±∞) = 0`, modeled as zero beyond the grid).
#[derive(Debug, Clone, Copy)]
pub struct ZeroTail;

impl TailLaw for ZeroTail {
    fn tail_value(&self, _s: f64) -> f64 {
        0.0
    }
}

/// Collocation of `I_1` at interior nodes:
/// `I_1[v](ξ_i) ≈ (A v)_i + b_i(tail)`, where `A` integrates the kernel
/// exactly against the Hermite interpolant of the nodal values on the grid and
/// includes the `-v_i ∫_{|s|>Ξ} (s-ξ_i)^{-2}` part of the far field.  Rows of
/// the two end nodes are zero.
#[derive(Debug, Clone)]
pub struct LineOperator {
    grid: LineGrid,
    matrix: DMatrix<f64>,
}

const FAR_RULE: usize = 8;

impl LineOperator {
    pub fn new(grid: LineGrid) -> Self {
        let n = grid.len();
        let nodes = grid.nodes().to_vec();
        let stencils = grid.derivative_stencils();
        let (gx, gw) = gauss_legendre(FAR_RULE);
        let t_ref: Vec<f64> = gx.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let basis_ref: Vec<[f64; 4]> = t_ref.iter().map(|&t| hermite_basis(t)[0]).collect();

        let mut matrix = DMatrix::<f64>::zeros(n, n);
        let mut cv = vec![0.0; n];
        let mut cd = vec![0.0; n];
        for i in 1..n - 1 {
            cv.iter_mut().for_each(|c| *c = 0.0);
            cd.iter_mut().for_each(|c| *c = 0.0);
            let xi = nodes[i];
            let mut diag = 0.0;
            for k in 0..n - 1 {
                let (a, b) = (nodes[k], nodes[k + 1]);
                let h = b - a;
                let dist = if xi < a { a - xi } else if xi > b { xi - b } else { 0.0 };
                if dist >= h {
                    // smooth: Gauss-Legendre on the interval
                    let mut acc = [0.0; 4];
                    for q in 0..FAR_RULE {
                        let s = a + h * t_ref[q];
                        let kern = 0.5 * h * gw[q] / ((s - xi) * (s - xi));
                        for bb in 0..4 {
                            acc[bb] += basis_ref[q][bb] * kern;
                        }
                    }
                    cv[k] += acc[0];
                    cd[k] += acc[1] * h;
                    cv[k + 1] += acc[2];
                    cd[k + 1] += acc[3] * h;
                    diag -= 1.0 / (a - xi) - 1.0 / (b - xi);
                } else {
                    // analytic expansion about ξ_i
                    let (ta, tb) = (a - xi, b - xi);
                    let coeffs = hermite_in_tau(h, xi - a);
                    let adjacent = k == i || k + 1 == i;
                    for (bb, c) in coeffs.iter().enumerate() {
                        let mut val = c[2] * (tb - ta) + 0.5 * c[3] * (tb * tb - ta * ta);
                        if !adjacent {
                            val += c[0] * (1.0 / ta - 1.0 / tb) + c[1] * (tb / ta).abs().ln();
                        }
                        match bb {
                            0 => cv[k] += val,
                            1 => cd[k] += val * h,
                            2 => cv[k + 1] += val,
                            _ => cd[k + 1] += val * h,
                        }
                    }
                    if !adjacent {
                        diag -= 1.0 / ta - 1.0 / tb;
                    }
                }
            }
            // principal value of the d_i/τ part over the two adjacent intervals
            let h_left = xi - nodes[i - 1];
            let h_right = nodes[i + 1] - xi;
            cd[i] += (h_right / h_left).ln();
            // far field: -v_i ∫_{|s|>Ξ} (s - ξ_i)^{-2} ds
            diag -= 1.0 / (nodes[n - 1] - xi) + 1.0 / (xi - nodes[0]);
            cv[i] += diag;
            for k in 0..n {
                if cd[k] != 0.0 {
                    let (s, w) = stencils[k];
                    for j in 0..5 {
                        cv[s + j] += cd[k] * w[j];
                    }
                }
            }
            for j in 0..n {
                matrix[(i, j)] = cv[j];
            }
        }
        Self { grid, matrix }
    }

    pub fn grid(&self) -> &LineGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `∫_{|s|>Ξ} f_tail(s) (s - ξ_i)^{-2} ds` for each interior row.
    pub fn tail_vector(&self, tail: &dyn TailLaw) -> Vec<f64> {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let (lo, hi) = (nodes[0], nodes[n - 1]);
        let tol = Tolerance::new(1e-14, 1e-12);
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let xi = nodes[i];
            // s = hi / t on the right, s = lo / t on the left, t ∈ (0, 1]
            let mut right = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let s = hi / t;
                tail.tail_value(s) * hi / ((hi - xi * t) * (hi - xi * t))
            };
            let mut left = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let s = lo / t;
                tail.tail_value(s) * (-lo) / ((lo - xi * t) * (lo - xi * t))
            };
            let pts = [0.0, 0.5, 0.9, 0.99, 1.0];
            out[i] = integrate_breaks(&mut right, &pts, tol).value + integrate_breaks(&mut left, &pts, tol).value;
        }
        out
    }

    /// `A v + b` at every interior node.
    pub fn apply(&self, values: &[f64], tail: &dyn TailLaw) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(values);
        let av = &self.matrix * v;
        let b = self.tail_vector(tail);
        av.iter().zip(&b).map(|(a, b)| a + b).collect()
    }
}

/// Coefficients of the four Hermite basis functions on `[a, a + h]` written
/// as cubics in `τ = s - ξ`, where `offset = ξ - a`.
fn hermite_in_tau(h: f64, offset: f64) -> [[f64; 4]; 4] {
    // basis in t: [c0, c1, c2, c3]
    let basis_t: [[f64; 4]; 4] = [
        [1.0, 0.0, -3.0, 2.0],
        [0.0, 1.0, -2.0, 1.0],
        [0.0, 0.0, 3.0, -2.0],
        [0.0, 0.0, -1.0, 1.0],
    ];
    // t = (τ + offset) / h = α τ + β
    let alpha = 1.0 / h;
    let beta = offset / h;
    // powers of (α τ + β) as polynomials in τ
    let mut pow = [[0.0; 4]; 4];
    pow[0][0] = 1.0;
    for p in 1..4 {
        for q in 0..4 {
            let mut v = beta * pow[p - 1][q];
            if q > 0 {
                v += alpha * pow[p - 1][q - 1];
            }
            pow[p][q] = v;
        }
    }
    let mut out = [[0.0; 4]; 4];
    for (b, bt) in basis_t.iter().enumerate() {
        for p in 0..4 {
            for q in 0..4 {
                out[b][q] += bt[p] * pow[p][q];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::frac_lap_1d;

    #[test]
    fn graded_grid_is_symmetric_and_fine_at_core() {
        let g = LineGrid::sinh_graded(200.0, 2001, 0.05).unwrap();
        assert_eq!(g.len(), 2001);
        assert_eq!(g.nodes()[1000], 0.0);
        for k in 0..1000 {
            assert!((g.nodes()[k] + g.nodes()[2000 - k]).abs() < 1e-12);
        }
        let target = 0.05 * 200.0 / 2001.0;
        assert!((g.spacing_at_origin() - target).abs() < 1e-3 * target);
    }

    #[test]
    fn fornberg_recovers_polynomial_derivative() {
        let nodes = [0.0, 0.1, 0.3, 0.35, 0.9];
        let w = fornberg(0.3, &nodes, 1);
        let d: f64 = nodes.iter().zip(&w[1]).map(|(x, w)| w * x.powi(4)).sum();
        assert!((d - 4.0 * 0.3f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn quadrature_weights_are_accurate() {
        let g = LineGrid::sinh_graded(10.0, 201, 0.2).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
        let val = g.integrate(&f);
        assert!((val - std::f64::consts::PI.sqrt()).abs() < 1e-6, "{}", val - std::f64::consts::PI.sqrt());
    }

    #[test]
    fn collocation_matches_adaptive_quadrature_on_bump() {
        // v(s) = exp(-s²), zero tail
        let g = LineGrid::sinh_graded(40.0, 801, 0.1).unwrap();
        let op = LineOperator::new(g.clone());
        let vals: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
        let out = op.apply(&vals, &ZeroTail);
        let f = (|s: f64| (-s * s).exp(), 40.0, (0.0, 0.0));
        for &i in &[100usize, 350, 400, 420, 600] {
            let x = g.nodes()[i];
            let exact = frac_lap_1d(&f, x);
            assert!((out[i] - exact).abs() < 1e-6, "node {i} at {x}: {} vs {}", out[i], exact);
        }
    }
}
