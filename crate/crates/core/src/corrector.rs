//! Corrector ψ of the linearized standing-wave equation
//! `L[ψ] = -C_n I_1[ψ] + W''(φ) ψ = g` with `∫ ψ φ̇ = 0`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, LU};

use crate::aeps::{a_bar_eps_direct, check_decay, phidot_moment, AepsParams, AepsTable, RateFit};
use crate::error::{invalid, Error, Result};
use crate::evolve::log_scale;
use crate::geometry::Point;
use crate::layer::LayerProfile;
use crate::line::{LineGrid, LineOperator, TailLaw, ZeroTail};
use crate::potential::Potential;

/// Tolerance on `|∫ g φ̇|` below which `g` is accepted as Fredholm-admissible.
pub const ORTHOGONALITY_TOL: f64 = 1e-5;
/// Tolerance on the normalization `|∫ ψ φ̇|`.
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// Frozen-point data defining the right-hand side `g`.
#[derive(Debug, Clone)]
pub struct CorrectorProblem<'a> {
    pub eps: f64,
    pub sigma: f64,
    pub sigma_tilde: f64,
    pub t: f64,
    pub x: Point,
    pub a: AepsTable,
    pub abar: f64,
    pub c0: f64,
    pub profile: &'a LayerProfile,
    pub potential: &'a Potential,
}

impl<'a> CorrectorProblem<'a> {
    /// Takes the shift `σ̃` and sets `σ = σ̃ W''(0)`; `ā_ε` is computed from
    /// the same `a_ε` samples and quadrature that enter `∫ g φ̇`.
    pub fn new(
        eps: f64,
        sigma_tilde: f64,
        t: f64,
        x: Point,
        a: AepsTable,
        profile: &'a LayerProfile,
        potential: &'a Potential,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return invalid("corrector needs 0 < eps < 1");
        }
        if !sigma_tilde.is_finite() {
            return invalid("shift must be finite");
        }
        let scale = log_scale(eps);
        let abar = phidot_moment(profile, &a) / scale;
        Ok(Self {
            eps,
            sigma: sigma_tilde * potential.d2w(0.0),
            sigma_tilde,
            t,
            x,
            a,
            abar,
            c0: profile.c0(),
            profile,
            potential,
        })
    }

    /// Samples `a_ε` at `x` on `m` nodes over `[-ξ_max, ξ_max]`.
    pub fn from_geometry(
        p: AepsParams<'a>,
        potential: &'a Potential,
        sigma_tilde: f64,
        t: f64,
        x: Point,
        xi_max: f64,
        m: usize,
    ) -> Result<Self> {
        let table = AepsTable::build(p, x, xi_max, m)?;
        let prob = Self::new(p.eps, sigma_tilde, t, x, table, p.profile, potential)?;
        debug_assert!((prob.abar - a_bar_eps_direct(p, &prob.a)).abs() <= 1e-12 * (1.0 + prob.abar.abs()));
        Ok(prob)
    }

    /// Flat front: `a_ε ≡ 0`.
    pub fn flat(eps: f64, sigma_tilde: f64, profile: &'a LayerProfile, potential: &'a Potential) -> Result<Self> {
        let grid = LineGrid::sinh_graded(10.0, 11, 0.5)?;
        let zeros = vec![0.0; grid.len()];
        Self::new(eps, sigma_tilde, 0.0, [0.0, 0.0], AepsTable::from_samples(grid, zeros)?, profile, potential)
    }

    pub fn scale(&self) -> f64 {
        log_scale(self.eps)
    }

    /// `∫ g φ̇ dξ` on the profile grid with closed-form tails.
    pub fn orthogonality(&self) -> f64 {
        let grid = self.profile.grid();
        let w = grid.quadrature_weights();
        let d1 = self.profile.derivative_table();
        let mut body = 0.0;
        for ((&xi, &wi), &pd) in grid.nodes().iter().zip(&w).zip(d1) {
            body += wi * self.potential_part(xi) * pd;
        }
        let a_part = phidot_moment(self.profile, &self.a) / self.scale();
        let forcing = self.c0 * (self.sigma - self.abar) * self.profile.c0_inverse();
        a_part + forcing + body
    }

    fn potential_part(&self, xi: f64) -> f64 {
        let w = self.potential;
        self.sigma_tilde * (w.d2w(self.profile.phi(xi)) - w.d2w(0.0))
    }
}

/// `g(ξ) = a_ε/(ε|ln ε|) + c_0 φ̇ (σ - ā_ε) + σ̃ (W''(φ) - W''(0))`.
pub fn build_g(prob: &CorrectorProblem, xi: f64) -> f64 {
    prob.a.eval(xi) / prob.scale() + prob.c0 * prob.profile.phi_dot(xi) * (prob.sigma - prob.abar) + prob.potential_part(xi)
}

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub xi: Vec<f64>,
    pub psi: Vec<f64>,
    pub g: Vec<f64>,
    /// Lagrange multiplier of the bordered system.
    pub lambda: f64,
    pub constraint_residual: f64,
    /// `sup |L ψ - g|` over `|ξ| ≤ Ξ/2`.
    pub equation_residual: f64,
    /// `sup |g|` over the same nodes.
    pub g_norm: f64,
}

impl CorrectorSolution {
    pub fn sup_norm(&self) -> f64 {
        self.psi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn equation_ok(&self) -> bool {
        self.equation_residual <= 1e-5 * self.g_norm.max(f64::MIN_POSITIVE)
    }

    /// `ξ,psi,g,bound` rows with `bound = 1/(ε|ln ε|(1+|ξ|))`.
    pub fn to_csv(&self, eps: f64) -> String {
        let scale = log_scale(eps);
        let mut s = String::from("xi,psi,g,bound\n");
        for ((x, p), g) in self.xi.iter().zip(&self.psi).zip(&self.g) {
            let _ = writeln!(s, "{:.10e},{:.10e},{:.10e},{:.10e}", x, p, g, 1.0 / (scale * (1.0 + x.abs())));
        }
        s
    }
}

/// `φ̇ ~ 1/(α s²)` beyond the grid.
struct DerivativeTail {
    alpha: f64,
}

impl TailLaw for DerivativeTail {
    fn tail_value(&self, s: f64) -> f64 {
        1.0 / (self.alpha * s * s)
    }
}

/// Dense discretization of `L` on the profile grid plus the factored
/// bordered system.
pub struct LinearizedOperator {
    line: LineOperator,
    cn: f64,
    wpp: Vec<f64>,
    phidot: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LinearizedOperator {
    pub fn new(profile: &LayerProfile, potential: &Potential) -> Result<Self> {
        let grid = profile.grid().clone();
        let n = grid.len();
        let line = LineOperator::new(grid.clone());
        let cn = potential.cn();
        let wpp: Vec<f64> = profile.values().iter().map(|&v| potential.d2w(v)).collect();
        let phidot = profile.derivative_table().to_vec();
        let weights = grid.quadrature_weights();

        let m = line.matrix();
        let mut b = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 1..n - 1 {
            for j in 0..n {
                b[(i, j)] = -cn * m[(i, j)];
            }
            b[(i, i)] += wpp[i];
            b[(i, n)] = phidot[i];
        }
        b[(0, 0)] = 1.0;
        b[(n - 1, n - 1)] = 1.0;
        for j in 0..n {
            b[(n, j)] = weights[j] * phidot[j];
        }
        let lu = b.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("bordered corrector system (kernel not captured by the border)".into()));
        }
        Ok(Self {
            line,
            cn,
            wpp,
            phidot,
            weights,
            alpha: profile.alpha(),
            lu,
        })
    }

    pub fn grid(&self) -> &LineGrid {
        self.line.grid()
    }

    /// `L v` at interior nodes for nodal values `v` continued by `tail`.
    pub fn apply(&self, values: &[f64], tail: &dyn TailLaw) -> Vec<f64> {
        let n = values.len();
        let i1 = self.line.apply(values, tail);
        let mut out: Vec<f64> = (0..n).map(|i| -self.cn * i1[i] + self.wpp[i] * values[i]).collect();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        out
    }

    /// Solves the bordered system for nodal `g`; returns `(ψ, λ)`.
    pub fn solve(&self, g: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.phidot.len();
        if g.len() != n {
            return invalid("right-hand side must match the grid");
        }
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 1..n - 1 {
            rhs[i] = g[i];
        }
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("bordered corrector system".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("corrector solve".into()));
        }
        Ok((sol.rows(0, n).iter().copied().collect(), sol[n]))
    }

    /// `∫ v φ̇` by the grid quadrature (the zero tail of `v` contributes nothing).
    pub fn moment(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.phidot).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    /// `sup |L v - g|` over interior nodes with `|ξ| ≤ Ξ/2`.
    pub fn residual(&self, v: &[f64], tail: &dyn TailLaw, g: &[f64]) -> f64 {
        let lv = self.apply(v, tail);
        let half = 0.5 * self.grid().half_width();
        let nodes = self.grid().nodes();
        (1..nodes.len() - 1)
            .filter(|&i| nodes[i].abs() <= half)
            .map(|i| (lv[i] - g[i]).abs())
            .fold(0.0, f64::max)
    }

    fn inner_sup(&self, v: &[f64]) -> f64 {
        let half = 0.5 * self.grid().half_width();
        self.grid()
            .nodes()
            .iter()
            .zip(v)
            .filter(|(x, _)| x.abs() <= half)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    /// `sup |L[v]|` on the inner half grid, `v` continued by the `φ̇` tail.
    pub fn kernel_residual(&self, v: &[f64]) -> f64 {
        let zeros = vec![0.0; v.len()];
        self.residual(v, &DerivativeTail { alpha: self.alpha }, &zeros)
    }

    /// `sup |L[φ̇]|` on the inner half grid.
    pub fn kernel_check(&self) -> f64 {
        self.kernel_residual(&self.phidot)
    }
}

/// Relative defect `|⟨f, I_1 g⟩ - ⟨I_1 f, g⟩| / max(|⟨f, I_1 g⟩|, |⟨I_1 f, g⟩|)`
/// of the collocation bilinear form under the grid quadrature.
pub fn symmetry_defect(line: &LineOperator, f: &[f64], g: &[f64]) -> f64 {
    let w = line.grid().quadrature_weights();
    let i1f = line.apply(f, &ZeroTail);
    let i1g = line.apply(g, &ZeroTail);
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&w).map(|((x, y), w)| x * y * w).sum() };
    let fg = dot(f, &i1g);
    let gf = dot(&i1f, g);
    (fg - gf).abs() / fg.abs().max(gf.abs())
}

/// Solves `L[ψ] = g`, `∫ψφ̇ = 0` for the problem's `g` on the operator grid.
pub fn solve_corrector(op: &LinearizedOperator, prob: &CorrectorProblem) -> Result<CorrectorSolution> {
    if op.grid().len() != prob.profile.grid().len() {
        return invalid("operator and profile grids differ");
    }
    let orth = prob.orthogonality();
    if !(orth.abs() <= ORTHOGONALITY_TOL) {
        return invalid(format!("right-hand side is not orthogonal to the kernel (∫gφ̇ = {orth:.3e})"));
    }
    let xi = op.grid().nodes().to_vec();
    let g: Vec<f64> = xi.iter().map(|&s| build_g(prob, s)).collect();
    solve_nodal(op, xi, g)
}

/// Bordered solve for nodal right-hand side values.
pub fn solve_nodal(op: &LinearizedOperator, xi: Vec<f64>, g: Vec<f64>) -> Result<CorrectorSolution> {
    let (psi, lambda) = op.solve(&g)?;
    let constraint_residual = op.moment(&psi).abs();
    if !(constraint_residual <= CONSTRAINT_TOL) {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: constraint_residual,
        });
    }
    let equation_residual = op.residual(&psi, &ZeroTail, &g);
    let g_norm = op.inner_sup(&g);
    Ok(CorrectorSolution {
        xi,
        psi,
        g,
        lambda,
        constraint_residual,
        equation_residual,
        g_norm,
    })
}

/// Fits `|ψ| ε|ln ε| ≤ C (1+|ξ|)^{-1}` over `lo ≤ |ξ| ≤ Ξ/2`.
pub fn psi_decay_fit(sol: &CorrectorSolution, eps: f64, lo: f64) -> Result<RateFit> {
    let scale = log_scale(eps);
    let half = 0.5 * sol.xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (x, y): (Vec<f64>, Vec<f64>) = sol
        .xi
        .iter()
        .zip(&sol.psi)
        .filter(|(s, _)| (lo..=half).contains(&s.abs()))
        .map(|(s, p)| (1.0 + s.abs(), p * scale))
        .unzip();
    check_decay(&x, &y, -1.0)
}

/// Fits `|g| ε|ln ε| ≤ C |ξ|^{-1}` over `lo ≤ |ξ| ≤ hi`.
pub fn g_decay_fit(prob: &CorrectorProblem, lo: f64, hi: f64, samples: usize) -> Result<RateFit> {
    let scale = prob.scale();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in 0..samples {
        let s = lo * (hi / lo).powf(k as f64 / (samples - 1) as f64);
        for sign in [1.0, -1.0] {
            x.push(s);
            y.push(build_g(prob, sign * s) * scale);
        }
    }
    check_decay(&x, &y, -1.0)
}

/// Odd, compactly supported `C³` test function `ξ (1 - (ξ/w)²)^4` on `|ξ| < w`.
pub fn manufactured_chi(xi: f64, width: f64) -> f64 {
    let r = xi / width;
    if r.abs() >= 1.0 {
        0.0
    } else {
        xi * (1.0 - r * r).powi(4)
    }
}

/// `L[χ]` at the grid nodes, with `I_1` by adaptive quadrature.
pub fn apply_l_by_quadrature<F: Fn(f64) -> f64>(
    chi: F,
    support: f64,
    profile: &LayerProfile,
    potential: &Potential,
) -> Vec<f64> {
    let f = (|s: f64| chi(s), support, (0.0, 0.0));
    let cn = potential.cn();
    profile
        .grid()
        .nodes()
        .iter()
        .zip(profile.values())
        .map(|(&s, &v)| -cn * crate::fracops::frac_lap_1d(&f, s) + potential.d2w(v) * chi(s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aeps::AepsParams;
    use crate::geometry::{ClampedCircle, FlatFront};

    fn setup(m: usize) -> (LayerProfile, Potential) {
        (
            LayerProfile::tabulate_exact(200.0, m).unwrap(),
            Potential::calibrated_cosine(2).unwrap(),
        )
    }

    #[test]
    fn flat_front_has_zero_rhs_and_solution() {
        let (profile, pot) = setup(801);
        let prob = CorrectorProblem::flat(0.05, 0.0, &profile, &pot).unwrap();
        for xi in [-30.0, -1.0, 0.0, 2.5, 100.0] {
            assert_eq!(build_g(&prob, xi), 0.0);
        }
        let op = LinearizedOperator::new(&profile, &pot).unwrap();
        let sol = solve_corrector(&op, &prob).unwrap();
        assert!(sol.sup_norm() == 0.0);
    }

    #[test]
    fn shift_only_rhs_is_orthogonal() {
        let (profile, pot) = setup(801);
        let prob = CorrectorProblem::flat(0.05, 0.05, &profile, &pot).unwrap();
        assert_eq!(prob.sigma, 0.05 * pot.d2w(0.0));
        assert!(prob.orthogonality().abs() < 1e-6, "{}", prob.orthogonality());
    }

    #[test]
    fn kernel_and_manufactured_solution() {
        let (profile, pot) = setup(1201);
        let op = LinearizedOperator::new(&profile, &pot).unwrap();
        let k = op.kernel_check();
        assert!(k <= 1e-5, "kernel residual {k}");

        let width = 6.0;
        let g = apply_l_by_quadrature(|s| manufactured_chi(s, width), width, &profile, &pot);
        let xi = profile.grid().nodes().to_vec();
        let sol = solve_nodal(&op, xi.clone(), g).unwrap();
        let err = xi
            .iter()
            .zip(&sol.psi)
            .map(|(&s, &p)| (p - manufactured_chi(s, width)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "manufactured error {err}");
        assert!(sol.constraint_residual <= CONSTRAINT_TOL);
    }

    #[test]
    fn bump_breaks_the_kernel() {
        let (profile, pot) = setup(801);
        let op = LinearizedOperator::new(&profile, &pot).unwrap();
        let amp = 1e-3;
        let v: Vec<f64> = profile
            .grid()
            .nodes()
            .iter()
            .zip(profile.derivative_table())
            .map(|(&s, &d)| d + amp * (-(s - 3.0) * (s - 3.0)).exp())
            .collect();
        assert!(op.kernel_residual(&v) >= 0.5 * amp * pot.max_abs_d2w());
    }

    #[test]
    fn bilinear_form_is_symmetric() {
        let grid = LineGrid::sinh_graded(30.0, 1201, 2.0).unwrap();
        let line = LineOperator::new(grid.clone());
        let nodes = grid.nodes();
        let f: Vec<f64> = nodes.iter().map(|&s| (-s * s / 4.0).exp()).collect();
        let g: Vec<f64> = nodes.iter().map(|&s| (1.0 + s) * (-(s - 1.0) * (s - 1.0) / 2.0).exp()).collect();
        let d = symmetry_defect(&line, &f, &g);
        assert!(d <= 1e-8, "symmetry defect {d}");
    }

    #[test]
    fn circle_corrector_decays() {
        let (profile, pot) = setup(801);
        let d = ClampedCircle {
            center: [0.0, 0.0],
            radius: 1.0,
            rho: 0.4,
        };
        let eps = 0.05;
        let p = AepsParams::new(eps, 0.5, &profile, &d).unwrap();
        let prob = CorrectorProblem::from_geometry(p, &pot, 0.0, 0.0, [1.0, 0.0], 60.0, 61).unwrap();
        assert!(prob.orthogonality().abs() <= 1e-6, "{}", prob.orthogonality());
        let op = LinearizedOperator::new(&profile, &pot).unwrap();
        let sol = solve_corrector(&op, &prob).unwrap();
        assert!(sol.equation_ok(), "{} vs {}", sol.equation_residual, sol.g_norm);
        let fit = psi_decay_fit(&sol, eps, 5.0).unwrap();
        assert!(fit.pass, "{fit:?}");
        let gfit = g_decay_fit(&prob, 1.0, 50.0, 25).unwrap();
        assert!(gfit.pass, "{gfit:?}");
    }

    #[test]
    fn flat_distance_gives_vanishing_a() {
        let (profile, pot) = setup(401);
        let d = FlatFront {
            normal: [1.0, 0.0],
            offset: 0.0,
            rho: f64::INFINITY,
        };
        let p = AepsParams::new(0.05, 0.5, &profile, &d).unwrap();
        let prob = CorrectorProblem::from_geometry(p, &pot, 0.0, 0.0, [0.0, 0.3], 30.0, 15).unwrap();
        assert!(prob.abar.abs() < 1e-12);
    }
}
