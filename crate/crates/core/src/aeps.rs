//! The kernel integrals
//!
//! ```text
//! a_ε(ξ; x) = ∫_{|z|<γ/ε} [φ(ξ + (d(x+εz) - d(x))/ε) - φ(ξ + ∇d(x)·z)] |z|^{-3} dz
//! ā_ε(x)    = (ε |ln ε|)^{-1} ∫_R a_ε(ξ; x) φ̇(ξ) dξ
//! ```
//!
//! evaluated by composite polar quadrature whose angular panels are graded
//! around the directions where the integrand has its unit-scale features.
//! `ā_ε` is computed through the overlap kernel `K(s) = ∫ φ(ξ+s) φ̇(ξ) dξ`,
//! which turns it into a single planar integral; a direct ξ-quadrature of
//! tabulated `a_ε` is kept as a cross-check.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::fracops::frac_lap_1d;
use crate::geometry::{DistanceFunction, Point};
use crate::layer::LayerProfile;
use crate::line::LineGrid;
use crate::quad::{gauss_legendre_on, integrate, Tolerance};

/// Inputs shared by every kernel integral at one `(ε, γ)`.
#[derive(Clone, Copy)]
pub struct AepsParams<'a> {
    pub eps: f64,
    pub gamma: f64,
    pub profile: &'a LayerProfile,
    pub d: &'a dyn DistanceFunction,
}

impl<'a> AepsParams<'a> {
    pub fn new(eps: f64, gamma: f64, profile: &'a LayerProfile, d: &'a dyn DistanceFunction) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return invalid(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        if !(eps > 0.0 && eps < gamma) {
            return invalid(format!("eps must lie in (0, gamma), got {eps}"));
        }
        Ok(Self { eps, gamma, profile, d })
    }

    /// `ε |ln ε|`
    pub fn scale(&self) -> f64 {
        self.eps * self.eps.ln().abs()
    }

    pub fn radius(&self) -> f64 {
        self.gamma / self.eps
    }
}

/// `K(s) = ∫ φ(ξ+s) φ̇(ξ) dξ` and `K'(s)`.
#[derive(Debug, Clone)]
pub enum OverlapKernel {
    /// Closed form for `φ = 1/2 + arctan(ξ)/π`: `K(s) = 1/2 + arctan(s/2)/π`.
    Exact,
    Table {
        grid: LineGrid,
        values: Vec<f64>,
        derivs: Vec<f64>,
        alpha: f64,
    },
}

impl OverlapKernel {
    /// Tabulates `K` for a general profile by quadrature on the profile grid.
    pub fn from_profile(profile: &LayerProfile) -> Result<Self> {
        let pg = profile.grid();
        let weights = pg.quadrature_weights();
        let dots: Vec<f64> = pg.nodes().iter().map(|&x| profile.phi_dot(x)).collect();
        let half = pg.half_width();
        let alpha = profile.alpha();
        let grid = LineGrid::sinh_graded(half, 801, 0.2)?;
        let mut values = Vec::with_capacity(grid.len());
        let mut derivs = Vec::with_capacity(grid.len());
        for &s in grid.nodes() {
            let mut k = 0.0;
            let mut kp = 0.0;
            for ((&x, &w), &dot) in pg.nodes().iter().zip(&weights).zip(&dots) {
                k += w * profile.phi(x + s) * dot;
                kp += w * profile.phi_dot(x + s) * dot;
            }
            // ∫_{|ξ|>Ξ}: φ̇ ≈ 1/(αξ²) and φ(ξ+s) ≈ H(ξ)
            k += 1.0 / (alpha * half);
            values.push(k);
            derivs.push(kp);
        }
        Ok(OverlapKernel::Table {
            grid,
            values,
            derivs,
            alpha,
        })
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            OverlapKernel::Exact => 0.5 + (0.5 * s).atan() / PI,
            OverlapKernel::Table {
                grid,
                values,
                derivs,
                alpha,
            } => {
                if s <= grid.lower() || s >= grid.upper() {
                    (if s > 0.0 { 1.0 } else { 0.0 }) - 2.0 / (alpha * s)
                } else {
                    crate::line::hermite_eval(grid, values, derivs, s, 0)
                }
            }
        }
    }
}

/// Local data at the evaluation point.
struct Frame<'a> {
    p: AepsParams<'a>,
    x: Point,
    d0: f64,
    grad: Point,
}

impl<'a> Frame<'a> {
    fn new(p: AepsParams<'a>, x: Point) -> Self {
        Self {
            d0: p.d.value(x),
            grad: p.d.gradient(x),
            p,
            x,
        }
    }

    fn a(&self, z: Point) -> f64 {
        let e = self.p.eps;
        (self.p.d.value([self.x[0] + e * z[0], self.x[1] + e * z[1]]) - self.d0) / e
    }

    fn b(&self, z: Point) -> f64 {
        self.grad[0] * z[0] + self.grad[1] * z[1]
    }
}

/// Angular sampling used to locate features along a circle `|z| = r`.
const SCAN: usize = 256;

/// Angles in `[0, π)` where any of the shifted arguments changes sign.
fn feature_angles(frame: &Frame, r: f64, shifts: &[f64]) -> Vec<f64> {
    let dir = |t: f64| [t.cos(), t.sin()];
    let args = |t: f64| {
        let e = dir(t);
        let zp = [r * e[0], r * e[1]];
        let zm = [-zp[0], -zp[1]];
        [frame.a(zp), frame.a(zm), frame.b(zp), frame.b(zm)]
    };
    let mut out = Vec::new();
    let mut prev = args(0.0);
    let step = PI / SCAN as f64;
    for k in 1..=SCAN {
        let t = k as f64 * step;
        let cur = args(t);
        for (q, (&a0, &a1)) in prev.iter().zip(&cur).enumerate() {
            for &s in shifts {
                if (a0 + s > 0.0) != (a1 + s > 0.0) {
                    let (mut lo, mut hi) = (t - step, t);
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        let v = args(mid)[q] + s;
                        if (v > 0.0) == (a0 + s > 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    out.push(0.5 * (lo + hi));
                }
            }
        }
        prev = cur;
    }
    out
}

/// Panel breakpoints in `[0, π]` graded geometrically toward each feature on
/// the angular scale `1/r`.
fn angular_breaks(r: f64, features: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 8.0).collect();
    let base = 0.5 / r.max(1.0);
    for &f in features {
        pts.push(f);
        let mut delta = base;
        while delta < PI / 8.0 {
            for p in [f - delta, f + delta] {
                if p > 0.0 && p < PI {
                    pts.push(p);
                }
            }
            delta *= 2.0;
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_gap = 1e-3 * base;
    pts.dedup_by(|a, b| (*a - *b).abs() < min_gap);
    pts
}

/// Radial panel breakpoints on `[0, r_max]`: `[0, 1/4]` then doubling.
fn radial_breaks(r_max: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut r = 0.25;
    while r < r_max {
        pts.push(r);
        r *= 2.0;
    }
    pts.push(r_max);
    pts
}

/// `∫_{|z|<r_max} F(z) |z|^{-3} dz` with `F` folded as `F(z) + F(-z)` over
/// the half circle; `f` receives `(A(z), B(z), A(-z), B(-z))`.
fn polar_integral(
    frame: &Frame,
    r_max: f64,
    order: usize,
    shifts: &[f64],
    f: &mut dyn FnMut([f64; 4]) -> f64,
) -> f64 {
    let rb = radial_breaks(r_max);
    let mut total = 0.0;
    for pair in rb.windows(2) {
        let (rs, rw) = gauss_legendre_on(order, pair[0], pair[1]);
        for (&r, &wr) in rs.iter().zip(&rw) {
            let feats = feature_angles(frame, r, shifts);
            let tb = angular_breaks(r, &feats);
            let mut ring = 0.0;
            for tp in tb.windows(2) {
                let (ts, tw) = gauss_legendre_on(order, tp[0], tp[1]);
                for (&t, &wt) in ts.iter().zip(&tw) {
                    let z = [r * t.cos(), r * t.sin()];
                    let zm = [-z[0], -z[1]];
                    ring += wt * f([frame.a(z), frame.b(z), frame.a(zm), frame.b(zm)]);
                }
            }
            // |z|^{-3} · r dr dθ
            total += wr * ring / (r * r);
        }
    }
    total
}

/// Runs `compute(order)` at increasing orders until two successive values
/// agree to `tol`.
fn refine(mut compute: impl FnMut(usize) -> f64, tol: f64) -> Result<f64> {
    let mut prev = compute(6);
    let mut last_diff = f64::INFINITY;
    for order in [10, 14, 20, 28, 40] {
        let cur = compute(order);
        last_diff = (cur - prev).abs();
        if last_diff <= tol * (1.0 + cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::NoConvergence {
        iterations: 6,
        residual: last_diff,
    })
}

/// Default agreement between successive refinements.
pub const REFINE_TOL: f64 = 1e-7;

/// `a_ε(ξ; x)`.
pub fn a_eps(p: AepsParams, xi: f64, x: Point) -> Result<f64> {
    let frame = Frame::new(p, x);
    let phi = |s: f64| p.profile.phi(s);
    let shifts = [0.0, xi];
    refine(
        |order| {
            polar_integral(&frame, p.radius(), order, &shifts, &mut |[ap, bp, am, bm]| {
                phi(xi + ap) - phi(xi + bp) + phi(xi + am) - phi(xi + bm)
            })
        },
        REFINE_TOL,
    )
}

/// `ā_ε(x)` through the overlap kernel.
pub fn a_bar_eps(p: AepsParams, kernel: &OverlapKernel, x: Point) -> Result<f64> {
    let frame = Frame::new(p, x);
    let raw = refine(
        |order| {
            polar_integral(&frame, p.radius(), order, &[0.0], &mut |[ap, bp, am, bm]| {
                kernel.value(ap) - kernel.value(bp) + kernel.value(am) - kernel.value(bm)
            })
        },
        REFINE_TOL,
    )?;
    Ok(raw / p.scale())
}

/// `a_ε(·; x)` sampled on a ξ grid, with `C/ξ` continuation beyond it.
#[derive(Debug, Clone)]
pub struct AepsTable {
    pub grid: LineGrid,
    pub values: Vec<f64>,
    derivs: Vec<f64>,
}

impl AepsTable {
    /// Samples `a_ε` on a sinh-graded grid of `m` points over `[-ξ_max, ξ_max]`.
    pub fn build(p: AepsParams, x: Point, xi_max: f64, m: usize) -> Result<Self> {
        let grid = LineGrid::sinh_graded(xi_max, m, 0.2)?;
        let values = grid
            .nodes()
            .iter()
            .map(|&xi| a_eps(p, xi, x))
            .collect::<Result<Vec<f64>>>()?;
        let derivs = grid.derivatives(&values);
        Ok(Self { grid, values, derivs })
    }

    /// Wraps nodal samples (e.g. the zero sampler of a flat front).
    pub fn from_samples(grid: LineGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid("sample count must match the grid");
        }
        let derivs = grid.derivatives(&values);
        Ok(Self { grid, values, derivs })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let g = &self.grid;
        if xi <= g.lower() {
            self.values[0] * g.lower() / xi
        } else if xi >= g.upper() {
            self.values[g.len() - 1] * g.upper() / xi
        } else {
            crate::line::hermite_eval(g, &self.values, &self.derivs, xi, 0)
        }
    }
}

/// `ā_ε` by direct ξ-quadrature of a tabulated `a_ε` against `φ̇`.
pub fn a_bar_eps_direct(p: AepsParams, table: &AepsTable) -> f64 {
    phidot_moment(p.profile, table) / p.scale()
}

/// `∫ a φ̇ dξ` on the profile grid, with the `a ~ c/ξ`, `φ̇ ~ 1/(αξ²)` tails
/// beyond `Ξ` integrated in closed form.
pub fn phidot_moment(profile: &LayerProfile, table: &AepsTable) -> f64 {
    let grid = profile.grid();
    let w = grid.quadrature_weights();
    let mut s = 0.0;
    for (&xi, &wi) in grid.nodes().iter().zip(&w) {
        s += wi * table.eval(xi) * profile.phi_dot(xi);
    }
    let half = grid.half_width();
    s + (table.eval(half) + table.eval(-half)) / (2.0 * profile.alpha() * half)
}

/// The limit `c₀⁻¹ μ tr((I - ∇̂d ⊗ ∇̂d) D²d)` of `ā_ε` (n = 2).
pub fn abar_limit(profile: &LayerProfile, d: &dyn DistanceFunction, x: Point) -> f64 {
    let g = d.gradient(x);
    let h = d.hessian(x);
    let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
    let e = [g[0] / n, g[1] / n];
    let tangential = h[0][0] + h[1][1] - (e[0] * e[0] * h[0][0] + 2.0 * e[0] * e[1] * h[0][1] + e[1] * e[1] * h[1][1]);
    profile.mu(2) / profile.c0() * tangential
}

/// Terms of the near-front identity at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub xi: f64,
    pub a_eps: f64,
    /// `ε I_2[φ(d/ε)](x)`
    pub eps_in: f64,
    /// `C_2 I_1[φ](d(x)/ε)`
    pub cn_i1: f64,
    pub residual: f64,
}

/// `|a_ε(d(x)/ε; x) - (ε I_2[φ(d/ε)](x) - C_2 I_1[φ](d(x)/ε))|`.
///
/// `ε I_2[φ(d/ε)]` is integrated in `z = y/ε` out to `far/ε`, beyond which
/// `d` is taken to be constant (true for clamped distances when `far`
/// exceeds the diameter of the set where `d` varies).
pub fn a_eps_identity_check(p: AepsParams, x: Point, far: f64, cn: f64) -> Result<IdentityCheck> {
    let frame = Frame::new(p, x);
    let xi = frame.d0 / p.eps;
    let a = a_eps(p, xi, x)?;
    let phi = |s: f64| p.profile.phi(s);
    let r_far = far / p.eps;
    let near = refine(
        |order| {
            polar_integral(&frame, r_far, order, &[0.0, xi], &mut |[ap, _, am, _]| {
                phi(xi + ap) + phi(xi + am) - 2.0 * phi(xi)
            })
        },
        REFINE_TOL,
    )?;
    // far field: A is frozen at its value on the outer circle; average it.
    let ring = integrate(
        |t: f64| phi(xi + frame.a([r_far * t.cos(), r_far * t.sin()])) - phi(xi),
        0.0,
        2.0 * PI,
        Tolerance::new(1e-12, 1e-10),
    )
    .value;
    let eps_in = near + ring / r_far;
    let cn_i1 = cn * frac_lap_1d(p.profile, xi);
    Ok(IdentityCheck {
        xi,
        a_eps: a,
        eps_in,
        cn_i1,
        residual: (a - (eps_in - cn_i1)).abs(),
    })
}

/// Least-squares fit `y ≈ C x^p` on log scales; returns `(p, C)`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("power-law fit needs at least two paired samples");
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return invalid("power-law fit needs positive finite samples");
    }
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return invalid("power-law fit needs distinct abscissae");
    }
    let slope = sxy / sxx;
    Ok((slope, (my - slope * mx).exp()))
}

/// Smallest `C` with `|values_i| ≤ C · rates_i` for all `i`.
pub fn fitted_bound_constant(values: &[f64], rates: &[f64]) -> f64 {
    values
        .iter()
        .zip(rates)
        .map(|(v, r)| v.abs() / r)
        .fold(0.0, f64::max)
}

/// Outcome of a "`≤ C · rate`" check in the fitted-constant sense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
    pub stated: f64,
    pub pass: bool,
}

/// A bound `|y| ≤ C x^stated` is accepted when the fitted exponent is at
/// least `stated - 0.3` and the envelope constant is finite.
pub fn check_rate(x: &[f64], y: &[f64], stated: f64) -> Result<RateFit> {
    let abs: Vec<f64> = y.iter().map(|v| v.abs().max(1e-300)).collect();
    let (exponent, _) = fit_power_law(x, &abs)?;
    let rates: Vec<f64> = x.iter().map(|v| v.powf(stated)).collect();
    let constant = fitted_bound_constant(&abs, &rates);
    Ok(RateFit {
        exponent,
        constant,
        stated,
        pass: exponent >= stated - 0.3 && constant.is_finite(),
    })
}

/// Far-field counterpart of [`check_rate`] for `x → ∞`: `|y| ≤ C x^stated`
/// is accepted when the fitted exponent is at most `stated + 0.3`.
pub fn check_decay(x: &[f64], y: &[f64], stated: f64) -> Result<RateFit> {
    let abs: Vec<f64> = y.iter().map(|v| v.abs().max(1e-300)).collect();
    let (exponent, _) = fit_power_law(x, &abs)?;
    let rates: Vec<f64> = x.iter().map(|v| v.powf(stated)).collect();
    let constant = fitted_bound_constant(&abs, &rates);
    Ok(RateFit {
        exponent,
        constant,
        stated,
        pass: exponent <= stated + 0.3 && constant.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClampedCircle, FlatFront};

    fn exact() -> LayerProfile {
        LayerProfile::tabulate_exact(200.0, 2001).unwrap()
    }

    #[test]
    fn flat_front_vanishes() {
        let prof = exact();
        let d = FlatFront { normal: [0.6, 0.8], offset: 1.0, rho: f64::INFINITY };
        let p = AepsParams::new(0.05, 0.5, &prof, &d).unwrap();
        for xi in [0.0, 1.5, -7.0] {
            assert!(a_eps(p, xi, [1.0, 0.5]).unwrap().abs() < 1e-12);
        }
        assert!(a_bar_eps(p, &OverlapKernel::Exact, [1.0, 0.5]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        let prof = exact();
        let d = FlatFront { normal: [1.0, 0.0], offset: 0.0, rho: f64::INFINITY };
        assert!(AepsParams::new(0.05, 1.5, &prof, &d).is_err());
        assert!(AepsParams::new(0.6, 0.5, &prof, &d).is_err());
    }

    #[test]
    fn tabulated_kernel_matches_closed_form() {
        let prof = exact();
        let k = OverlapKernel::from_profile(&prof).unwrap();
        for s in [-30.0, -2.0, 0.0, 0.3, 5.0, 150.0, 500.0] {
            assert!((k.value(s) - OverlapKernel::Exact.value(s)).abs() < 1e-4, "{s}");
        }
    }

    #[test]
    fn kernel_and_direct_routes_agree() {
        let prof = exact();
        let d = ClampedCircle { center: [0.0, 0.0], radius: 1.0, rho: 0.25 };
        let p = AepsParams::new(0.1, 0.5, &prof, &d).unwrap();
        let x = [1.0, 0.0];
        let via_k = a_bar_eps(p, &OverlapKernel::Exact, x).unwrap();
        let table = AepsTable::build(p, x, 60.0, 121).unwrap();
        let direct = a_bar_eps_direct(p, &table);
        assert!(via_k < 0.0);
        assert!((via_k - direct).abs() < 2e-3 * via_k.abs(), "{via_k} {direct}");
    }

    #[test]
    fn power_law_fit() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        let (p, c) = fit_power_law(&x, &y).unwrap();
        assert!((p - 0.5).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
        assert!(check_rate(&x, &y, 0.5).unwrap().pass);
        assert!(!check_rate(&x, &[1.0, 1.0, 1.0], 0.5).unwrap().pass);
    }
}
