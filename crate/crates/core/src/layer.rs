//! The layer solution `φ` of `C_n I_1[φ] = W'(φ)`, `φ(-∞) = 0`, `φ(+∞) = 1`,
//! `φ(0) = 1/2`: closed form for the calibrated cosine, numerical solve for
//! general potentials, tabulation with a `H(ξ) - 1/(αξ)` tail.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fracops::{unit_sphere_area, LineFunction};
use crate::line::{hermite_eval, LineGrid, LineOperator, TailLaw};
use crate::potential::Potential;

/// `1/2 + atan(ξ)/π`.
pub fn exact_profile(xi: f64) -> f64 {
    0.5 + xi.atan() / PI
}

/// `φ̇ = 1 / (π (1 + ξ²))`.
pub fn exact_profile_d1(xi: f64) -> f64 {
    1.0 / (PI * (1.0 + xi * xi))
}

/// `φ̈ = -2ξ / (π (1 + ξ²)²)`.
pub fn exact_profile_d2(xi: f64) -> f64 {
    let q = 1.0 + xi * xi;
    -2.0 * xi / (PI * q * q)
}

/// The closed-form layer of the calibrated cosine as a [`LineFunction`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactLayer;

impl LineFunction for ExactLayer {
    fn value(&self, s: f64) -> f64 {
        if s.abs() > 1e3 {
            // avoid cancellation in 1/2 + atan/π far out
            if s > 0.0 {
                1.0 - (1.0 / s).atan() / PI
            } else {
                -(1.0 / s).atan() / PI
            }
        } else {
            exact_profile(s)
        }
    }
    fn tail_start(&self) -> f64 {
        100.0
    }
    fn limits(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Far field `H(s) - 1/(α s)` of the layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerTail {
    pub alpha: f64,
}

impl LayerTail {
    pub fn value(&self, s: f64, order: usize) -> f64 {
        let a = self.alpha;
        match order {
            0 => (if s > 0.0 { 1.0 } else { 0.0 }) - 1.0 / (a * s),
            1 => 1.0 / (a * s * s),
            _ => -2.0 / (a * s * s * s),
        }
    }
}

impl TailLaw for LayerTail {
    fn tail_value(&self, s: f64) -> f64 {
        self.value(s, 0)
    }
}

/// Tabulated layer profile with analytic tail continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProfile {
    grid: LineGrid,
    values: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    alpha: f64,
    c_fit: f64,
}

/// Diagnostics of [`solve_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub projected: bool,
}

impl LayerProfile {
    /// Builds a profile from nodal values and first derivatives; second
    /// derivatives come from differentiating the first.
    pub fn from_tables(grid: LineGrid, values: Vec<f64>, d1: Vec<f64>, d2: Option<Vec<f64>>, alpha: f64) -> Result<Self> {
        let n = grid.len();
        if values.len() != n || d1.len() != n {
            return invalid("profile tables must match the grid");
        }
        if !(alpha > 0.0) {
            return invalid("tail coefficient must be positive");
        }
        let d2 = match d2 {
            Some(d) if d.len() == n => d,
            Some(_) => return invalid("second-derivative table must match the grid"),
            None => grid.derivatives(&d1),
        };
        let mut p = Self {
            grid,
            values,
            d1,
            d2,
            alpha,
            c_fit: f64::NAN,
        };
        p.enforce_monotone();
        p.check_invariants()?;
        p.c_fit = p.fit_tail_constant();
        Ok(p)
    }

    /// Tabulates the closed-form layer of the calibrated cosine.
    pub fn tabulate_exact(half_width: f64, m: usize) -> Result<Self> {
        let grid = LineGrid::sinh_graded(half_width, m, 0.05)?;
        let values = grid.nodes().iter().map(|&x| exact_profile(x)).collect();
        let d1 = grid.nodes().iter().map(|&x| exact_profile_d1(x)).collect();
        let d2 = grid.nodes().iter().map(|&x| exact_profile_d2(x)).collect();
        Self::from_tables(grid, values, d1, Some(d2), PI)
    }

    /// Fritsch-Carlson limiting of the nodal slopes (a no-op for well
    /// resolved smooth profiles).
    fn enforce_monotone(&mut self) {
        let x = self.grid.nodes();
        for k in 0..x.len() - 1 {
            let delta = (self.values[k + 1] - self.values[k]) / (x[k + 1] - x[k]);
            if delta <= 0.0 {
                self.d1[k] = self.d1[k].max(0.0);
                self.d1[k + 1] = self.d1[k + 1].max(0.0);
                continue;
            }
            let a = self.d1[k] / delta;
            let b = self.d1[k + 1] / delta;
            if a < 0.0 {
                self.d1[k] = 0.0;
            }
            if b < 0.0 {
                self.d1[k + 1] = 0.0;
            }
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                self.d1[k] = tau * a * delta;
                self.d1[k + 1] = tau * b * delta;
            }
        }
    }

    fn check_invariants(&self) -> Result<()> {
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("profile values must be strictly increasing");
        }
        if self.values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return invalid("profile values must lie in (0, 1)");
        }
        let c = self.grid.center_index();
        if self.grid.nodes()[c] != 0.0 || (self.values[c] - 0.5).abs() > 1e-10 {
            return invalid("profile must pass through (0, 1/2)");
        }
        Ok(())
    }

    pub fn grid(&self) -> &LineGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative_table(&self) -> &[f64] {
        &self.d1
    }

    pub fn half_width(&self) -> f64 {
        self.grid.half_width()
    }

    /// Tail coefficient `α` used for `|ξ| > Ξ`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `max |ξ|² |φ - H + 1/(αξ)|` over table nodes with `|ξ| ≥ 1`.
    pub fn c_fit(&self) -> f64 {
        self.c_fit
    }

    pub fn tail(&self) -> LayerTail {
        LayerTail { alpha: self.alpha }
    }

    /// `φ`, `φ̇` or `φ̈` at `ξ` (monotone cubic inside the table, analytic tail outside).
    pub fn eval(&self, xi: f64, order: usize) -> f64 {
        if xi.abs() > self.grid.half_width() {
            return self.tail().value(xi, order);
        }
        match order {
            0 => hermite_eval(&self.grid, &self.values, &self.d1, xi, 0),
            1 => hermite_eval(&self.grid, &self.d1, &self.d2, xi, 0),
            _ => hermite_eval(&self.grid, &self.d1, &self.d2, xi, 1),
        }
    }

    pub fn phi(&self, xi: f64) -> f64 {
        self.eval(xi, 0)
    }

    pub fn phi_dot(&self, xi: f64) -> f64 {
        self.eval(xi, 1)
    }

    /// `c_0^{-1} = ∫ φ̇²`, table quadrature plus the analytic tails.
    pub fn c0_inverse(&self) -> f64 {
        let sq: Vec<f64> = self.d1.iter().map(|d| d * d).collect();
        let body = self.grid.integrate(&sq);
        let xi = self.grid.half_width();
        body + 2.0 / (3.0 * self.alpha * self.alpha * xi.powi(3))
    }

    pub fn c0(&self) -> f64 {
        1.0 / self.c0_inverse()
    }

    /// `μ = (c_0 / 2) |S^{n-2}| / (n - 1)`.
    pub fn mu(&self, n: usize) -> f64 {
        assert!(n >= 2);
        0.5 * self.c0() * unit_sphere_area(n - 2) / (n as f64 - 1.0)
    }

    /// Least-squares fit of `ξ (H - φ) ≈ a + b/ξ` on `20 ≤ |ξ| ≤ Ξ/2`; returns `1/a`.
    pub fn fit_alpha(&self) -> f64 {
        let half = 0.5 * self.grid.half_width();
        let (mut s11, mut s1x, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &v) in self.grid.nodes().iter().zip(&self.values) {
            let a = x.abs();
            if !(20.0..=half).contains(&a) {
                continue;
            }
            let h = if x > 0.0 { 1.0 } else { 0.0 };
            let y = x * (h - v);
            let z = 1.0 / x;
            s11 += 1.0;
            s1x += z;
            sxx += z * z;
            sy += y;
            sxy += z * y;
        }
        let det = s11 * sxx - s1x * s1x;
        let a = (sy * sxx - s1x * sxy) / det;
        1.0 / a
    }

    fn fit_tail_constant(&self) -> f64 {
        let mut c = 0.0f64;
        for (&x, &v) in self.grid.nodes().iter().zip(&self.values) {
            if x.abs() >= 1.0 {
                let h = if x > 0.0 { 1.0 } else { 0.0 };
                c = c.max(x * x * (v - h + 1.0 / (self.alpha * x)).abs());
            }
        }
        c
    }

    /// Writes the versioned CSV table (`xi,phi,dphi,ddphi`).
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# pnflow layer profile v1");
        let _ = writeln!(s, "# alpha={:.17e}", self.alpha);
        let _ = writeln!(s, "xi,phi,dphi,ddphi");
        for k in 0..self.grid.len() {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.grid.nodes()[k],
                self.values[k],
                self.d1[k],
                self.d2[k]
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("# pnflow layer profile v1") {
            return Err(Error::Parse("missing or unsupported profile version header".into()));
        }
        let alpha = lines
            .next()
            .and_then(|l| l.trim().strip_prefix("# alpha="))
            .ok_or_else(|| Error::Parse("missing alpha line".into()))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("alpha: {e}")))?;
        if lines.next().map(str::trim) != Some("xi,phi,dphi,ddphi") {
            return Err(Error::Parse("missing column header".into()));
        }
        let (mut x, mut v, mut d1, mut d2) = (vec![], vec![], vec![], vec![]);
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row {k}: {e}")))?;
            if cols.len() != 4 {
                return Err(Error::Parse(format!("row {k}: expected 4 columns")));
            }
            x.push(cols[0]);
            v.push(cols[1]);
            d1.push(cols[2]);
            d2.push(cols[3]);
        }
        Self::from_tables(LineGrid::from_nodes(x)?, v, d1, Some(d2), alpha)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

impl LineFunction for LayerProfile {
    fn value(&self, s: f64) -> f64 {
        self.eval(s, 0)
    }
    fn tail_start(&self) -> f64 {
        self.grid.half_width()
    }
    fn limits(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Damped Newton iteration for the truncated standing-wave problem.
///
/// Unknowns are the nodal values with `|ξ| ≤ 3Ξ/4` except the center, which
/// is pinned to 1/2; the outer nodes and the far field are pinned to the tail
/// law `H(ξ) - 1/(αξ)`, `α = W''(0)/C_n`. The iteration starts from a
/// tanh front, not from any closed form.
pub fn solve_profile(potential: &Potential, half_width: f64, m: usize) -> Result<(LayerProfile, SolveReport)> {
    if half_width < 50.0 {
        return invalid(format!("domain half-width must be at least 50, got {half_width}"));
    }
    if m < 2000 {
        return invalid(format!("need at least 2000 grid points, got {m}"));
    }
    potential.validate()?;
    let alpha = potential.alpha();
    let cn = potential.cn();
    let grid = LineGrid::sinh_graded(half_width, m, 0.05)?;
    let op = LineOperator::new(grid.clone());
    let tail = LayerTail { alpha };
    let b = op.tail_vector(&tail);
    let nodes = grid.nodes().to_vec();
    let n = nodes.len();
    let center = grid.center_index();
    let pin = 0.75 * half_width;
    let unknowns: Vec<usize> = (0..n).filter(|&k| k != center && nodes[k].abs() <= pin).collect();
    let nu = unknowns.len();

    let mut v: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            if x.abs() > pin {
                tail.value(x, 0)
            } else {
                // generic monotone start; the Newton iteration supplies the shape
                0.5 + 0.5 * (x / 2.0).tanh()
            }
        })
        .collect();
    v[center] = 0.5;

    let a = op.matrix();
    let residual = |v: &[f64]| -> Vec<f64> {
        let vv = DVector::from_column_slice(v);
        unknowns
            .iter()
            .map(|&i| cn * (a.row(i).dot(&vv.transpose()) + b[i]) - potential.dw(v[i]))
            .collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut r = residual(&v);
    let mut rn = norm(&r);
    let mut iterations = 0;
    let mut projected = false;
    let max_iter = 40;
    while rn > 1e-11 && iterations < max_iter {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(nu, nu);
        for (p, &i) in unknowns.iter().enumerate() {
            for (q, &j) in unknowns.iter().enumerate() {
                jac[(p, q)] = cn * a[(i, j)];
            }
            jac[(p, p)] -= potential.d2w(v[i]);
        }
        let rhs = DVector::from_vec(r.iter().map(|x| -x).collect());
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("standing-wave Jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let mut trial = v.clone();
            for (p, &i) in unknowns.iter().enumerate() {
                trial[i] += lambda * step[p];
            }
            let rt = residual(&trial);
            let rtn = norm(&rt);
            if rtn < rn || lambda < 1e-3 {
                v = trial;
                r = rt;
                rn = rtn;
                break;
            }
            lambda *= 0.5;
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            // project onto the monotone envelope and keep iterating
            projected = true;
            for k in 1..n {
                if !(v[k] > v[k - 1]) {
                    v[k] = v[k - 1] + 1e-14;
                }
            }
            r = residual(&v);
            rn = norm(&r);
        }
    }
    if rn > 1e-8 {
        return Err(Error::NoConvergence {
            iterations,
            residual: rn,
        });
    }
    let d1 = grid.derivatives(&v);
    let profile = LayerProfile::from_tables(grid, v, d1, None, alpha)?;
    Ok((
        profile,
        SolveReport {
            iterations,
            residual: rn,
            projected,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_profile_values() {
        assert_eq!(exact_profile(0.0), 0.5);
        assert!((exact_profile(1.0) - 0.75).abs() < 1e-15);
        assert!((exact_profile(-1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn eval_orders_match_closed_form() {
        let p = LayerProfile::tabulate_exact(200.0, 2001).unwrap();
        assert!((p.eval(0.0, 1) - 1.0 / PI).abs() < 1e-10);
        assert!((p.eval(2.0, 2) + 4.0 / (25.0 * PI)).abs() < 1e-6);
        assert!((p.eval(1e6, 0) - 1.0).abs() < 1e-6);
        assert!(p.eval(-1e6, 0).abs() < 1e-6);
        for &x in &[-30.0, -3.3, -0.01, 0.7, 12.0, 150.0] {
            assert!((p.eval(x, 0) - exact_profile(x)).abs() < 1e-9, "x={x}");
            assert!((p.eval(x, 1) - exact_profile_d1(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn c0_and_mu() {
        let p = LayerProfile::tabulate_exact(200.0, 2001).unwrap();
        assert!((p.c0_inverse() - 1.0 / (2.0 * PI)).abs() < 1e-4);
        assert!((p.c0() - 2.0 * PI).abs() < 1e-3);
        assert!((p.mu(2) - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn tail_fit_of_exact_profile() {
        let p = LayerProfile::tabulate_exact(200.0, 2001).unwrap();
        assert!((p.fit_alpha() - PI).abs() < 0.02 * PI);
        assert!(p.c_fit().is_finite());
    }

    #[test]
    fn csv_round_trip() {
        let p = LayerProfile::tabulate_exact(60.0, 301).unwrap();
        let q = LayerProfile::from_csv(&p.to_csv()).unwrap();
        assert_eq!(p, q);
        assert!(LayerProfile::from_csv("garbage").is_err());
    }

    #[test]
    fn rejects_bad_solve_parameters() {
        let w = Potential::calibrated_cosine(2).unwrap();
        assert!(solve_profile(&w, 20.0, 2001).is_err());
        assert!(solve_profile(&w, 200.0, 500).is_err());
    }
}
