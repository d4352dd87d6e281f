//! Discretizations of the half-Laplacian type operator
//!
//! ```text
//! I_n u(x) = P.V. ∫_{R^n} (u(x+y) - u(x)) |y|^{-(n+1)} dy
//! ```
//!
//! * a spectral version on periodic boxes (symbol `-κ_n |k|`, `κ_n = π C_n`),
//! * adaptive principal-value quadrature on the line for functions with known
//!   far-field behavior,
//! * truncated-kernel polar quadrature in the plane, used as an oracle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::{wavenumber_magnitudes, Fft2, GridShape, PeriodicField};
use crate::quad::{integrate, integrate_breaks, Tolerance};

/// Surface area of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn unit_sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => unit_sphere_area(k - 2) * 2.0 * PI / (k as f64 - 1.0),
    }
}

/// `C_n = ∫_{R^{n-1}} (|y|² + 1)^{-(n+1)/2} dy`, by radial quadrature.
///
/// `n = 1` returns 1 (the integral over `R^0`).
pub fn compute_cn(n: usize) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return invalid(format!("C_n is only provided for n in 1..=3, got {n}"));
    }
    if n == 1 {
        return Ok(1.0);
    }
    let power = (n as f64 + 1.0) / 2.0;
    let radial_dim = n as i32 - 2;
    // r = t / (1 - t) maps [0, 1) onto [0, ∞).
    let integrand = |t: f64| {
        let r = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        r.powi(radial_dim) * (1.0 + r * r).powf(-power) * jac
    };
    let res = integrate(integrand, 0.0, 1.0, Tolerance::new(1e-15, 1e-14));
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.evaluations,
            residual: res.error,
        });
    }
    Ok(unit_sphere_area(n - 2) * res.value)
}

/// `(∫_{|z|<R} |z|^{-(n-1)} dz, ∫_{|z|>R} |z|^{-(n+1)} dz) = (|S^{n-1}| R, |S^{n-1}| / R)`.
pub fn kernel_shell_integrals(n: usize, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return invalid(format!("shell radius must be positive, got {r}"));
    }
    if n == 0 {
        return invalid("dimension must be at least 1");
    }
    let s = unit_sphere_area(n - 1);
    Ok((s * r, s / r))
}

/// Fourier multiplier constant: `I_n` acts as `-κ_n |k|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSymbol {
    pub kappa: f64,
}

impl SpectralSymbol {
    /// `κ_n = C_n ∫_R (1 - cos t) t^{-2} dt = π C_n`.
    pub fn for_dimension(n: usize) -> Result<Self> {
        Ok(Self {
            kappa: PI * compute_cn(n)?,
        })
    }

    pub fn eigenvalue(&self, k_abs: f64) -> f64 {
        -self.kappa * k_abs
    }
}

/// Spectral `I_2` on a periodic box, with cached transform plans.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    shape: GridShape,
    symbol: SpectralSymbol,
    k_abs: Vec<f64>,
    fft: Fft2,
    buffer: Vec<Complex64>,
}

impl SpectralOperator {
    pub fn new(shape: GridShape) -> Result<Self> {
        Ok(Self {
            shape,
            symbol: SpectralSymbol::for_dimension(2)?,
            k_abs: wavenumber_magnitudes(shape),
            fft: Fft2::new(shape.m),
            buffer: vec![Complex64::new(0.0, 0.0); shape.len()],
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn symbol(&self) -> SpectralSymbol {
        self.symbol
    }

    pub fn k_abs(&self) -> &[f64] {
        &self.k_abs
    }

    /// Multiplies the spectrum of `f` by `multiplier(|k|)` and returns the real
    /// part together with the largest imaginary residue.
    pub fn apply_multiplier(
        &mut self,
        f: &PeriodicField,
        multiplier: impl Fn(f64) -> f64,
    ) -> Result<(PeriodicField, f64)> {
        if f.shape() != self.shape {
            return invalid("field shape does not match operator grid");
        }
        f.check_finite("spectral operator input")?;
        for (b, &v) in self.buffer.iter_mut().zip(f.values()) {
            *b = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut self.buffer);
        for (b, &k) in self.buffer.iter_mut().zip(&self.k_abs) {
            *b *= multiplier(k);
        }
        self.fft.inverse(&mut self.buffer);
        let mut imag = 0.0f64;
        let values = self
            .buffer
            .iter()
            .map(|c| {
                imag = imag.max(c.im.abs());
                c.re
            })
            .collect();
        Ok((PeriodicField::new(self.shape, values)?, imag))
    }

    /// `I_2 f`; constants (the zero mode) are annihilated.
    pub fn apply(&mut self, f: &PeriodicField) -> Result<PeriodicField> {
        let kappa = self.symbol.kappa;
        Ok(self.apply_multiplier(f, |k| -kappa * k)?.0)
    }
}

/// One-shot spectral `I_2 f`.
pub fn frac_lap_spectral(f: &PeriodicField) -> Result<PeriodicField> {
    SpectralOperator::new(f.shape())?.apply(f)
}

/// A function on the line that can be evaluated everywhere, with a smooth
/// far field beyond `|s| > tail_start()`.
pub trait LineFunction {
    fn value(&self, s: f64) -> f64;
    /// Beyond this radius the function follows its (analytic) tail law.
    fn tail_start(&self) -> f64;
    /// Limits at `-∞` and `+∞`.
    fn limits(&self) -> (f64, f64);
}

impl<F: Fn(f64) -> f64> LineFunction for (F, f64, (f64, f64)) {
    fn value(&self, s: f64) -> f64 {
        (self.0)(s)
    }
    fn tail_start(&self) -> f64 {
        self.1
    }
    fn limits(&self) -> (f64, f64) {
        self.2
    }
}

/// Principal-value `I_1[v](ξ)` by adaptive quadrature.
///
/// Inner zone `0 < y ≤ 1` uses the symmetric second difference
/// `(v(ξ+y) + v(ξ-y) - 2v(ξ)) / y²`; the outer zone is integrated directly up
/// to a radius where both arguments lie in the tail, and the remainder is
/// integrated in the compactified variable `t = Y/y`.
pub fn frac_lap_1d<V: LineFunction + ?Sized>(v: &V, xi: f64) -> f64 {
    frac_lap_1d_tol(v, xi, Tolerance::new(1e-11, 1e-11))
}

pub fn frac_lap_1d_tol<V: LineFunction + ?Sized>(v: &V, xi: f64, tol: Tolerance) -> f64 {
    let v0 = v.value(xi);
    let mut g = |y: f64| (v.value(xi + y) + v.value(xi - y) - 2.0 * v0) / (y * y);
    let inner = integrate_breaks(&mut g, &[0.0, 0.25, 1.0], tol).value;

    let start = v.tail_start();
    let a = xi.abs();
    let big = a + start + 1.0;
    let mut points = vec![1.0, big];
    for p in [
        a - 20.0,
        a - 5.0,
        a - 1.0,
        a,
        a + 1.0,
        a + 5.0,
        a + 20.0,
        start - xi,
        start + xi,
        2.0 * a,
    ] {
        if p > 1.0 && p < big {
            points.push(p);
        }
    }
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    points.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let outer = integrate_breaks(&mut g, &points, tol).value;

    let (lo, hi) = v.limits();
    let mut far = |t: f64| {
        if t <= 0.0 {
            return lo + hi - 2.0 * v0;
        }
        let y = big / t;
        v.value(xi + y) + v.value(xi - y) - 2.0 * v0
    };
    let tail = integrate_breaks(&mut far, &[0.0, 0.5, 1.0], tol).value / big;
    inner + outer + tail
}

/// Truncated-kernel polar quadrature in the plane:
/// `∫_{|y|<radius} (f(x+y) - f(x)) |y|^{-3} dy`, with `±y` paired so the
/// integrand stays bounded at the origin.
///
/// Callers add the far field (e.g. `-f(x) · 2π / radius` plus whatever the
/// truncated region carries).
pub fn truncated_kernel_integral<F: Fn([f64; 2]) -> f64>(
    f: &F,
    x: [f64; 2],
    radius: f64,
    radial_breaks: &[f64],
    tol: Tolerance,
) -> f64 {
    let f0 = f(x);
    let angular = |r: f64| {
        let mut h = |theta: f64| {
            let (s, c) = theta.sin_cos();
            let dx = [r * c, r * s];
            f([x[0] + dx[0], x[1] + dx[1]]) + f([x[0] - dx[0], x[1] - dx[1]]) - 2.0 * f0
        };
        let pts: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 8.0).collect();
        integrate_breaks(&mut h, &pts, Tolerance::new(tol.abs * 0.1, tol.rel)).value / (r * r)
    };
    let mut pts = vec![0.0];
    for &b in radial_breaks {
        if b > 0.0 && b < radius {
            pts.push(b);
        }
    }
    pts.push(radius);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut g = angular;
    integrate_breaks(&mut g, &pts, tol).value
}

/// Lattice shells summed explicitly by [`lattice_image_sum`].
const IMAGE_SHELLS: i32 = 16;

/// `Σ_{n ∈ Z², n ≠ 0} |offset - nL|^{-3}`: shells `|n|_∞ ≤ 16` explicitly,
/// the rest by its continuum limit `4√2 / (a L²)`, `a = 16.5 L`.
pub fn lattice_image_sum(l: f64, offset: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in -IMAGE_SHELLS..=IMAGE_SHELLS {
        for j in -IMAGE_SHELLS..=IMAGE_SHELLS {
            if i == 0 && j == 0 {
                continue;
            }
            let dx = offset[0] - i as f64 * l;
            let dy = offset[1] - j as f64 * l;
            s += (dx * dx + dy * dy).powf(-1.5);
        }
    }
    let a = (IMAGE_SHELLS as f64 + 0.5) * l;
    s + 4.0 * std::f64::consts::SQRT_2 / (a * l * l)
}

/// Monopole part of the periodic-image contribution to spectral `I_2` of a
/// field that equals `background` outside a compact set around `center`.
/// Subtracting it from the periodic result approximates the free-space
/// operator.
#[derive(Debug, Clone, Copy)]
pub struct ImageCorrection {
    pub side: f64,
    pub center: [f64; 2],
    pub mass: f64,
}

impl ImageCorrection {
    pub fn new(f: &PeriodicField, center: [f64; 2], background: f64) -> Self {
        let h = f.h();
        let mass = f.values().iter().map(|v| v - background).sum::<f64>() * h * h;
        Self {
            side: f.side(),
            center,
            mass,
        }
    }

    pub fn at(&self, x: [f64; 2]) -> f64 {
        self.mass * lattice_image_sum(self.side, [x[0] - self.center[0], x[1] - self.center[1]])
    }
}

/// Free-space `I_2 f(x)` by polar quadrature for `f` that vanishes beyond
/// `radius` from `x` (to working precision); `breaks` are radial panel ends.
pub fn frac_lap_quadrature_2d<F: Fn([f64; 2]) -> f64>(f: &F, x: [f64; 2], radius: f64, breaks: &[f64]) -> f64 {
    let tol = Tolerance::new(1e-13, 1e-11);
    truncated_kernel_integral(f, x, radius, breaks, tol) - f(x) * 2.0 * PI / radius
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cn_values() {
        assert!((compute_cn(2).unwrap() - 2.0).abs() < 1e-10);
        assert!((compute_cn(3).unwrap() - PI).abs() < 1e-10 * PI);
        assert!(compute_cn(5).is_err());
    }

    #[test]
    fn shell_integrals() {
        let (a, b) = kernel_shell_integrals(2, 1.0).unwrap();
        assert!((a - 2.0 * PI).abs() < 1e-14 && (b - 2.0 * PI).abs() < 1e-14);
        let (a, b) = kernel_shell_integrals(2, 2.0).unwrap();
        assert!((a - 4.0 * PI).abs() < 1e-14 && (b - PI).abs() < 1e-14);
        let (a, b) = kernel_shell_integrals(1, 1.0).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b - 2.0).abs() < 1e-14);
        assert!(kernel_shell_integrals(2, 0.0).is_err());
        assert!(kernel_shell_integrals(2, -1.0).is_err());
    }

    #[test]
    fn shell_integrals_match_quadrature() {
        // n = 2, R = 1.5, polar coordinates; outer part with s = R / t
        let r = 1.5;
        let inner = integrate(|_s| 2.0 * PI, 0.0, r, Tolerance::default()).value;
        let outer = integrate(|t| 2.0 * PI / r * (t / t), 0.0, 1.0, Tolerance::default()).value;
        let (a, b) = kernel_shell_integrals(2, r).unwrap();
        assert!((inner - a).abs() < 1e-10);
        assert!((outer - b).abs() < 1e-10);
    }

    #[test]
    fn symbols() {
        assert!((SpectralSymbol::for_dimension(1).unwrap().kappa - PI).abs() < 1e-12);
        assert!((SpectralSymbol::for_dimension(2).unwrap().kappa - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn constants_are_annihilated() {
        let shape = GridShape::new(4.0, 32).unwrap();
        let out = frac_lap_spectral(&PeriodicField::constant(shape, 7.0)).unwrap();
        assert!(out.max_abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_input() {
        let shape = GridShape::new(4.0, 16).unwrap();
        let mut f = PeriodicField::constant(shape, 1.0);
        f.values_mut()[3] = f64::NAN;
        assert!(frac_lap_spectral(&f).is_err());
    }

    #[test]
    fn image_sum_is_converged_and_symmetric() {
        let a = lattice_image_sum(4.0, [0.3, -0.2]);
        let b = lattice_image_sum(4.0, [-0.3, 0.2]);
        assert!((a - b).abs() < 1e-14 * a);
        // Σ' |n|^{-3} over Z² (Epstein zeta at 3/2) ≈ 9.0336
        let z = lattice_image_sum(1.0, [0.0, 0.0]);
        assert!((z - 9.0336).abs() < 2e-3, "{z}");
    }

    #[test]
    fn gaussian_spectral_matches_quadrature() {
        let shape = GridShape::new(4.0, 256).unwrap();
        let c = [2.0, 2.0];
        let s2 = 0.15f64 * 0.15;
        let g = move |p: [f64; 2]| (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (2.0 * s2)).exp();
        let f = PeriodicField::from_fn(shape, g);
        let spec = frac_lap_spectral(&f).unwrap();
        let corr = ImageCorrection::new(&f, c, 0.0);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (i, j) in [(128, 128), (136, 128), (148, 140), (180, 128)] {
            let x = shape.point(i, j);
            let q = frac_lap_quadrature_2d(&g, x, 1.9, &[0.05, 0.15, 0.3, 0.6, 1.0]);
            worst = worst.max((spec.at(i, j) - corr.at(x) - q).abs());
            scale = scale.max(q.abs());
        }
        assert!(worst / scale <= 1e-4, "{}", worst / scale);
    }

    #[test]
    fn affine_line_function_has_zero_pv() {
        let v = (|s: f64| 0.3 * s + 2.0, 10.0, (f64::NEG_INFINITY, f64::INFINITY));
        assert!(frac_lap_1d(&v, 0.7).abs() < 1e-12);
        assert!(frac_lap_1d(&v, -25.0).abs() < 1e-12);
    }
}
