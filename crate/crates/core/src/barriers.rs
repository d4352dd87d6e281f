//! Barrier functions `v^ε = Σ φ((d_i - σ̃)/ε) + ε|ln ε| Σ ψ_i - σ̃ ε|ln ε|`
//! over shrinking concentric circles, and the check of the subsolution
//! inequality `ε ∂_t v - (ε I_2 v - W'(v)) / (ε|ln ε|) ≤ -σ/4`.

use std::fmt::Write as _;

use crate::aeps::AepsParams;
use crate::corrector::{solve_corrector, CorrectorProblem, LinearizedOperator};
use crate::error::{invalid, Error, Result};
use crate::evolve::log_scale;
use crate::field::{GridShape, PeriodicField};
use crate::fracops::{ImageCorrection, SpectralOperator};
use crate::geometry::{ClampedCircle, DistanceFunction, FlatFront, Point};
use crate::layer::LayerProfile;
use crate::line::hermite_eval;
use crate::potential::Potential;

/// Subsolution (`σ̃ > 0` shift towards the inside) or its mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sub,
    Super,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Sub => 1.0,
            Side::Super => -1.0,
        }
    }
}

/// Front families; `d_i` is positive inside.
#[derive(Debug, Clone, PartialEq)]
pub enum Fronts {
    /// Concentric circles, outermost first, radii `R_i(t) = R_i - C t`.
    Circles { center: Point, radii: Vec<f64> },
    /// Parallel lines `d_i = n·x - c_i - C t` (unclamped).
    Flat { normal: Point, offsets: Vec<f64> },
}

/// Distance function of one front at one time.
#[derive(Debug, Clone, Copy)]
pub enum FrontDistance {
    Circle(ClampedCircle),
    Flat(FlatFront),
}

impl DistanceFunction for FrontDistance {
    fn value(&self, p: Point) -> f64 {
        match self {
            FrontDistance::Circle(c) => c.value(p),
            FrontDistance::Flat(f) => f.value(p),
        }
    }

    fn gradient(&self, p: Point) -> Point {
        match self {
            FrontDistance::Circle(c) => c.gradient(p),
            FrontDistance::Flat(f) => f.gradient(p),
        }
    }

    fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        match self {
            FrontDistance::Circle(c) => c.hessian(p),
            FrontDistance::Flat(f) => f.hessian(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec {
    pub eps: f64,
    pub gamma: f64,
    pub sigma_tilde: f64,
    /// `σ = W''(0) σ̃`.
    pub sigma: f64,
    pub fronts: Fronts,
    pub rho: f64,
    /// Shrinking speed `C`.
    pub speed: f64,
    /// Largest time at which the speed condition is guaranteed.
    pub horizon: f64,
    pub side: Side,
}

impl BarrierSpec {
    /// Shrinking circles with the smallest admissible speed up to `horizon`:
    /// `C ≥ μ / (R_min(horizon) - ρ) + c_0 σ`.
    #[allow(clippy::too_many_arguments)]
    pub fn circles(
        eps: f64,
        gamma: f64,
        sigma_tilde: f64,
        center: Point,
        radii: Vec<f64>,
        rho: f64,
        horizon: f64,
        profile: &LayerProfile,
        potential: &Potential,
    ) -> Result<Self> {
        let mut spec = Self {
            eps,
            gamma,
            sigma_tilde,
            sigma: sigma_tilde * potential.d2w(0.0),
            fronts: Fronts::Circles { center, radii },
            rho,
            speed: 0.0,
            horizon,
            side: Side::Sub,
        };
        spec.validate_shape()?;
        spec.speed = spec.min_speed(profile)?;
        spec.validate(profile)?;
        Ok(spec)
    }

    /// Static straight fronts (no corrector is needed when `σ̃ = 0`).
    pub fn flat(eps: f64, sigma_tilde: f64, normal: Point, offsets: Vec<f64>, potential: &Potential) -> Result<Self> {
        let spec = Self {
            eps,
            gamma: 0.5,
            sigma_tilde,
            sigma: sigma_tilde * potential.d2w(0.0),
            fronts: Fronts::Flat { normal, offsets },
            rho: f64::INFINITY,
            speed: 0.0,
            horizon: 0.0,
            side: Side::Sub,
        };
        spec.validate_shape()?;
        Ok(spec)
    }

    /// The mirrored supersolution construction with the same fronts and speed.
    pub fn mirrored(&self) -> Self {
        let mut s = self.clone();
        s.side = match self.side {
            Side::Sub => Side::Super,
            Side::Super => Side::Sub,
        };
        s
    }

    pub fn n(&self) -> usize {
        match &self.fronts {
            Fronts::Circles { radii, .. } => radii.len(),
            Fronts::Flat { offsets, .. } => offsets.len(),
        }
    }

    /// Signed shift `s σ̃` with `s = ±1` for sub/super.
    pub fn shift(&self) -> f64 {
        self.side.sign() * self.sigma_tilde
    }

    pub fn radius(&self, i: usize, t: f64) -> Option<f64> {
        match &self.fronts {
            Fronts::Circles { radii, .. } => Some(radii[i] - self.speed * t),
            Fronts::Flat { .. } => None,
        }
    }

    pub fn distance(&self, i: usize, t: f64) -> FrontDistance {
        match &self.fronts {
            Fronts::Circles { center, radii } => FrontDistance::Circle(ClampedCircle {
                center: *center,
                radius: radii[i] - self.speed * t,
                rho: self.rho,
            }),
            Fronts::Flat { normal, offsets } => FrontDistance::Flat(FlatFront {
                normal: *normal,
                offset: offsets[i] + self.speed * t,
                rho: f64::INFINITY,
            }),
        }
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return invalid("barrier needs 0 < eps < 1");
        }
        if !(self.gamma > self.eps && self.gamma < 1.0) {
            return invalid("barrier needs eps < gamma < 1");
        }
        if !(self.sigma_tilde >= 0.0 && self.sigma_tilde.is_finite()) {
            return invalid("shift must be non-negative");
        }
        if self.n() == 0 {
            return invalid("barrier needs at least one front");
        }
        match &self.fronts {
            Fronts::Circles { radii, .. } => {
                if !(self.rho > 0.0 && self.rho.is_finite()) {
                    return invalid("clamp scale must be positive");
                }
                if radii.iter().any(|&r| !(r > self.rho)) {
                    return invalid("every radius must exceed the clamp scale");
                }
                // the linear zones |d_i| ≤ ρ (which contain the σ̃-bands) are disjoint
                if radii.windows(2).any(|w| !(w[0] - w[1] > 2.0 * self.rho)) {
                    return invalid("radii must decrease with separation above 2ρ");
                }
                if !(self.sigma_tilde < self.rho) {
                    return invalid("shift must be smaller than the clamp scale");
                }
            }
            Fronts::Flat { normal, offsets } => {
                if ((normal[0] * normal[0] + normal[1] * normal[1]).sqrt() - 1.0).abs() > 1e-12 {
                    return invalid("normal must be a unit vector");
                }
                if offsets.windows(2).any(|w| !(w[1] > w[0])) {
                    return invalid("offsets must increase");
                }
            }
        }
        Ok(())
    }

    /// Smallest `C` with `C ≥ μ / (R_min - C T - ρ) + c_0 σ`.
    pub fn min_speed(&self, profile: &LayerProfile) -> Result<f64> {
        let Fronts::Circles { radii, .. } = &self.fronts else {
            return Ok(0.0);
        };
        let mu = profile.mu(2);
        let c0 = profile.c0();
        let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut c = mu / (r_min - self.rho) + c0 * self.sigma;
        for _ in 0..200 {
            let gap = r_min - c * self.horizon - self.rho;
            if !(gap > 0.0) {
                return invalid("horizon too long: the inner circle reaches the clamp scale");
            }
            let next = mu / gap + c0 * self.sigma;
            if (next - c).abs() <= 1e-13 * next {
                return Ok(next);
            }
            c = next;
        }
        invalid("no admissible shrinking speed for this horizon")
    }

    /// Checks the speed condition `∂_t d_i ≤ μ Δd_i - c_0 σ` on the linear
    /// zones up to the horizon (subsolutions) or its mirror (supersolutions).
    pub fn validate(&self, profile: &LayerProfile) -> Result<()> {
        self.validate_shape()?;
        if let Fronts::Circles { radii, .. } = &self.fronts {
            let mu = profile.mu(2);
            let c0 = profile.c0();
            for &r in radii {
                let r_end = r - self.speed * self.horizon;
                match self.side {
                    Side::Sub => {
                        if r_end - self.rho <= 0.0 || self.speed < mu / (r_end - self.rho) + c0 * self.sigma - 1e-12 {
                            return invalid("shrinking speed violates the subsolution condition");
                        }
                    }
                    Side::Super => {
                        if self.speed > mu / (r + self.rho) - c0 * self.sigma + 1e-12 {
                            return invalid("shrinking speed violates the supersolution condition");
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `ψ` on the profile grid, Hermite-interpolated; zero beyond `±Ξ`.
#[derive(Debug, Clone)]
struct NodalCurve {
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl NodalCurve {
    fn new(profile: &LayerProfile, values: Vec<f64>) -> Self {
        let derivs = profile.grid().derivatives(&values);
        Self { values, derivs }
    }

    fn eval(&self, profile: &LayerProfile, xi: f64) -> f64 {
        let g = profile.grid();
        if xi <= g.lower() || xi >= g.upper() {
            0.0
        } else {
            hermite_eval(g, &self.values, &self.derivs, xi, 0)
        }
    }
}

/// What lies beyond one end of a radial table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ghost {
    /// Even continuation through the center.
    Mirror,
    /// The table ends where `a_ε ≡ 0` begins: the far corrector applies.
    Far,
    /// The table was restricted to a window; extrapolate linearly.
    Open,
}

/// Correctors of one circle at one time, tabulated on uniform radii
/// `r_k = r_lo + (k + 1/2) Δr` and Catmull-Rom interpolated in `r`.
#[derive(Debug, Clone)]
struct RadialTable {
    center: Point,
    r_lo: f64,
    dr: f64,
    curves: Vec<NodalCurve>,
    below: Ghost,
    above: Ghost,
    /// Radii where `a_ε` vanishes identically lie outside this interval.
    active: (f64, f64),
}

#[derive(Debug, Clone)]
struct CorrectorBank {
    far: NodalCurve,
    radial: Option<RadialTable>,
}

impl CorrectorBank {
    fn eval(&self, profile: &LayerProfile, x: Point, xi: f64) -> Result<f64> {
        let Some(tab) = &self.radial else {
            return Ok(self.far.eval(profile, xi));
        };
        let r = ((x[0] - tab.center[0]).powi(2) + (x[1] - tab.center[1]).powi(2)).sqrt();
        if r < tab.active.0 || r > tab.active.1 {
            return Ok(self.far.eval(profile, xi));
        }
        let n = tab.curves.len() as isize;
        let u = (r - tab.r_lo) / tab.dr - 0.5;
        let lo_edge = if tab.below == Ghost::Open { -0.5 } else { -1.0 };
        let hi_edge = if tab.above == Ghost::Open { n as f64 - 0.5 } else { n as f64 };
        if n < 2 || u < lo_edge - 1e-12 || u > hi_edge + 1e-12 {
            return Err(Error::InvalidInput(format!("missing corrector at radius {r:.4}")));
        }
        let k = (u.floor() as isize).clamp(-1, n - 1);
        let t = u - k as f64;
        let node = |idx: isize| -> f64 {
            if idx >= 0 && idx < n {
                return tab.curves[idx as usize].eval(profile, xi);
            }
            let (ghost, a, b) = if idx < 0 { (tab.below, 0, 1) } else { (tab.above, n - 1, n - 2) };
            match ghost {
                Ghost::Mirror => tab.curves[(-idx - 1) as usize].eval(profile, xi),
                Ghost::Far => self.far.eval(profile, xi),
                Ghost::Open => {
                    let steps = if idx < 0 { -idx } else { idx - (n - 1) } as f64;
                    let ca = tab.curves[a as usize].eval(profile, xi);
                    let cb = tab.curves[b as usize].eval(profile, xi);
                    ca + steps * (ca - cb)
                }
            }
        };
        let w = catmull_rom(t);
        Ok((0..4).map(|j| w[j] * node(k - 1 + j as isize)).sum())
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Resolution of the corrector tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankOptions {
    /// Radial nodes per circle over the active radii.
    pub r_nodes: usize,
    /// `a_ε` samples in `ξ`.
    pub xi_nodes: usize,
    pub xi_max: f64,
    /// Restricts tabulation to this radial window (evaluations outside it
    /// but inside the active region are rejected).
    pub window: Option<(f64, f64)>,
}

impl Default for BankOptions {
    fn default() -> Self {
        Self {
            r_nodes: 24,
            xi_nodes: 33,
            xi_max: 60.0,
            window: None,
        }
    }
}

/// A barrier with correctors prepared at a set of time levels.
pub struct Barrier<'a> {
    pub spec: BarrierSpec,
    profile: &'a LayerProfile,
    potential: &'a Potential,
    levels: Vec<(f64, Vec<CorrectorBank>)>,
}

impl<'a> Barrier<'a> {
    pub fn new(spec: BarrierSpec, profile: &'a LayerProfile, potential: &'a Potential) -> Self {
        Self {
            spec,
            profile,
            potential,
            levels: Vec::new(),
        }
    }

    pub fn profile(&self) -> &LayerProfile {
        self.profile
    }

    pub fn times(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.0).collect()
    }

    /// Solves and tabulates the correctors of every front at time `t`.
    pub fn prepare(&mut self, op: &LinearizedOperator, t: f64, opts: BankOptions) -> Result<()> {
        if self.level(t).is_some() {
            return Ok(());
        }
        let spec = &self.spec;
        let shift = spec.shift();
        let far_prob = CorrectorProblem::flat(spec.eps, shift, self.profile, self.potential)?;
        let far = NodalCurve::new(self.profile, solve_corrector(op, &far_prob)?.psi);
        let mut banks = Vec::with_capacity(spec.n());
        for i in 0..spec.n() {
            let radial = match (&spec.fronts, spec.radius(i, t)) {
                (Fronts::Circles { center, .. }, Some(r)) => Some(self.radial_table(op, i, t, *center, r, opts)?),
                _ => None,
            };
            banks.push(CorrectorBank {
                far: far.clone(),
                radial,
            });
        }
        self.levels.push((t, banks));
        Ok(())
    }

    fn radial_table(
        &self,
        op: &LinearizedOperator,
        i: usize,
        t: f64,
        center: Point,
        radius: f64,
        opts: BankOptions,
    ) -> Result<RadialTable> {
        let spec = &self.spec;
        if opts.r_nodes < 2 || opts.xi_nodes < 5 {
            return invalid("corrector tables need at least 2 radii and 5 samples in xi");
        }
        // a_ε vanishes where d is constant on the whole γ-disc
        let reach = 2.0 * spec.rho + spec.gamma;
        let active = ((radius - reach).max(0.0), radius + reach);
        let (mut lo, mut hi) = active;
        if let Some((a, b)) = opts.window {
            lo = lo.max(a);
            hi = hi.min(b);
        }
        let below = if lo == 0.0 {
            Ghost::Mirror
        } else if lo == active.0 {
            Ghost::Far
        } else {
            Ghost::Open
        };
        let above = if hi == active.1 { Ghost::Far } else { Ghost::Open };
        if !(hi > lo) {
            return Ok(RadialTable {
                center,
                r_lo: lo,
                dr: 1.0,
                curves: Vec::new(),
                below,
                above,
                active,
            });
        }
        let dr = (hi - lo) / opts.r_nodes as f64;
        let d = spec.distance(i, t);
        let p = AepsParams::new(spec.eps, spec.gamma, self.profile, &d)?;
        let mut curves = Vec::with_capacity(opts.r_nodes);
        for k in 0..opts.r_nodes {
            let r = lo + (k as f64 + 0.5) * dr;
            let x = [center[0] + r, center[1]];
            let prob = CorrectorProblem::from_geometry(p, self.potential, spec.shift(), t, x, opts.xi_max, opts.xi_nodes)?;
            curves.push(NodalCurve::new(self.profile, solve_corrector(op, &prob)?.psi));
        }
        Ok(RadialTable {
            center,
            r_lo: lo,
            dr,
            curves,
            below,
            above,
            active,
        })
    }

    fn level(&self, t: f64) -> Option<&Vec<CorrectorBank>> {
        self.levels
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-14 * (1.0 + t.abs()))
            .map(|l| &l.1)
    }

    /// Plain layer part `Σ φ((d_i - sσ̃)/ε)` (no correctors needed).
    pub fn layers(&self, t: f64, x: Point) -> f64 {
        let spec = &self.spec;
        (0..spec.n())
            .map(|i| self.profile.phi((spec.distance(i, t).value(x) - spec.shift()) / spec.eps))
            .sum()
    }

    /// `v^ε(t, x)`.
    pub fn value(&self, t: f64, x: Point) -> Result<f64> {
        let spec = &self.spec;
        let banks = self
            .level(t)
            .ok_or_else(|| Error::InvalidInput(format!("missing corrector at t = {t}")))?;
        let scale = log_scale(spec.eps);
        let mut v = -spec.shift() * scale;
        for (i, bank) in banks.iter().enumerate() {
            let xi = (spec.distance(i, t).value(x) - spec.shift()) / spec.eps;
            v += self.profile.phi(xi) + scale * bank.eval(self.profile, x, xi)?;
        }
        Ok(v)
    }
}

/// `v^ε(t, x)` for a prepared barrier.
pub fn build_barrier(b: &Barrier, t: f64, x: Point) -> Result<f64> {
    b.value(t, x)
}

/// Grid nodes where the residual is evaluated: `band[k] = Some(i)` for
/// nodes in front `i`'s band `|d_i - σ̃| ≤ |ln ε|^{-1/2}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub nodes: Vec<(usize, usize)>,
    pub band: Vec<Option<usize>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Every `band_stride`-th node inside the bands plus every
/// `lattice_stride`-th node elsewhere.
pub fn stratified_samples(spec: &BarrierSpec, t: f64, shape: GridShape, band_stride: usize, lattice_stride: usize) -> SampleSet {
    let width = 1.0 / spec.eps.ln().abs().sqrt();
    let mut set = SampleSet::default();
    let (bs, ls) = (band_stride.max(1), lattice_stride.max(1));
    for i in 0..shape.m {
        for j in 0..shape.m {
            let x = shape.point(i, j);
            let band = (0..spec.n()).find(|&k| (spec.distance(k, t).value(x) - spec.shift()).abs() <= width);
            let take = match band {
                Some(_) => i % bs == 0 && j % bs == 0,
                None => i % ls == 0 && j % ls == 0,
            };
            if take {
                set.nodes.push((i, j));
                set.band.push(band);
            }
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackSample {
    pub x: Point,
    pub band: Option<usize>,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlackReport {
    pub t: f64,
    pub samples: Vec<SlackSample>,
    /// `max s·J` over the samples (`s = ±1` for sub/super).
    pub worst: f64,
    /// `-σ/4`.
    pub threshold: f64,
    pub worst_band: f64,
    pub worst_lattice: f64,
    pub pass: bool,
}

impl SlackReport {
    /// `t,x,y,band,J,threshold` rows (band `-1` for lattice samples).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,y,band,J,threshold\n");
        for p in &self.samples {
            let band = p.band.map(|b| b as i64).unwrap_or(-1);
            let _ = writeln!(
                s,
                "{:.10e},{:.10e},{:.10e},{},{:.10e},{:.10e}",
                self.t, p.x[0], p.x[1], band, p.j, self.threshold
            );
        }
        s
    }
}

/// Evaluates `J[v] = ε ∂_t v - (ε I_2 v - W'(v)) / (ε|ln ε|)` at the samples.
///
/// `∂_t v` is the centered difference over `t ± dt` (correctors must be
/// prepared at all three levels); `I_2 v` is the spectral operator on `shape`
/// minus the monopole of the periodic images.
pub fn check_subsolution(b: &Barrier, t: f64, dt: f64, shape: GridShape, samples: &SampleSet) -> Result<SlackReport> {
    let spec = &b.spec;
    let Fronts::Circles { center, radii } = &spec.fronts else {
        return invalid("the subsolution check needs circular fronts");
    };
    if shape.h() > spec.eps / 4.0 {
        return Err(Error::UnderResolved(format!("grid spacing {} exceeds eps/4", shape.h())));
    }
    let support = radii[0] + 2.0 * spec.rho + spec.gamma;
    let c = shape.center();
    if (center[0] - c[0]).abs() > 1e-12 || (center[1] - c[1]).abs() > 1e-12 || support >= 0.5 * shape.l {
        return invalid("circles must be centered in a box wider than their support");
    }
    if !(dt > 0.0) {
        return invalid("time step for the centered difference must be positive");
    }
    let mut values = Vec::with_capacity(shape.len());
    for i in 0..shape.m {
        for j in 0..shape.m {
            values.push(b.value(t, shape.point(i, j))?);
        }
    }
    let v = PeriodicField::new(shape, values)?;
    let background = b.value(t, [0.0, 0.0])?;
    let images = ImageCorrection::new(&v, *center, background);
    let i2 = SpectralOperator::new(shape)?.apply(&v)?;

    let eps = spec.eps;
    let scale = log_scale(eps);
    let sign = spec.side.sign();
    let mut out = Vec::with_capacity(samples.len());
    let (mut worst, mut worst_band, mut worst_lattice) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (&(i, j), &band) in samples.nodes.iter().zip(&samples.band) {
        let x = shape.point(i, j);
        let vt = (b.value(t + dt, x)? - b.value(t - dt, x)?) / (2.0 * dt);
        let u = v.at(i, j);
        let op = i2.at(i, j) - images.at(x);
        let jv = eps * vt - (eps * op - b.potential.dw(u)) / scale;
        if !jv.is_finite() {
            return Err(Error::NonFinite("barrier residual".into()));
        }
        let s = sign * jv;
        worst = worst.max(s);
        if band.is_some() {
            worst_band = worst_band.max(s);
        } else {
            worst_lattice = worst_lattice.max(s);
        }
        out.push(SlackSample { x, band, j: jv });
    }
    let threshold = -spec.sigma / 4.0;
    Ok(SlackReport {
        t,
        samples: out,
        worst,
        threshold,
        worst_band,
        worst_lattice,
        pass: worst <= threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauCheck {
    /// Points satisfying `d_N - σ̃ ≥ 2N / (α σ̃ |ln ε|)`.
    pub admissible: usize,
    /// `min (v - (N - 2σ̃ε|ln ε|))` over admissible points.
    pub min_margin: f64,
    pub pass: bool,
}

/// Checks `v ≥ N - 2σ̃ε|ln ε|` at the points deep inside all fronts, taking
/// the generic constant of the depth condition as `2N/α`: the layer tails
/// `1/(αξ)` then use at most half of the `σ̃ε|ln ε|` margin.
pub fn plateau_check(b: &Barrier, t: f64, points: &[Point]) -> Result<PlateauCheck> {
    let spec = &b.spec;
    let n = spec.n() as f64;
    let lg = spec.eps.ln().abs();
    let depth = 2.0 * n / (b.profile.alpha() * spec.sigma_tilde * lg);
    let bound = n - 2.0 * spec.sigma_tilde * spec.eps * lg;
    let mut admissible = 0;
    let mut min_margin = f64::INFINITY;
    for &x in points {
        let deep = (0..spec.n()).all(|i| spec.distance(i, t).value(x) - spec.sigma_tilde >= depth);
        if deep {
            admissible += 1;
            min_margin = min_margin.min(b.value(t, x)? - bound);
        }
    }
    Ok(PlateauCheck {
        admissible,
        min_margin,
        pass: admissible > 0 && min_margin >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (LayerProfile, Potential) {
        (
            LayerProfile::tabulate_exact(200.0, 801).unwrap(),
            Potential::calibrated_cosine(2).unwrap(),
        )
    }

    #[test]
    fn flat_front_reduces_to_profile() {
        let (profile, pot) = setup();
        let spec = BarrierSpec::flat(0.05, 0.0, [1.0, 0.0], vec![0.3], &pot).unwrap();
        let op = LinearizedOperator::new(&profile, &pot).unwrap();
        let mut b = Barrier::new(spec, &profile, &pot);
        b.prepare(&op, 0.0, BankOptions::default()).unwrap();
        for x in [[0.1, 0.0], [0.3, 2.0], [0.9, -1.0]] {
            let v = build_barrier(&b, 0.0, x).unwrap();
            assert!((v - profile.phi((x[0] - 0.3) / 0.05)).abs() < 1e-14);
        }
    }

    #[test]
    fn missing_level_is_rejected() {
        let (profile, pot) = setup();
        let spec = BarrierSpec::flat(0.05, 0.0, [1.0, 0.0], vec![0.0], &pot).unwrap();
        let b = Barrier::new(spec, &profile, &pot);
        assert!(build_barrier(&b, 0.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn spec_validation() {
        let (profile, pot) = setup();
        let ok = BarrierSpec::circles(0.025, 0.5, 0.05, [0.0, 0.0], vec![1.2, 0.6], 0.24, 0.0, &profile, &pot).unwrap();
        let mu = profile.mu(2);
        let expect = mu / (0.6 - 0.24) + profile.c0() * ok.sigma;
        assert!((ok.speed - expect).abs() < 1e-12 * expect);
        assert_eq!(ok.sigma, 0.05 * pot.d2w(0.0));
        assert!(BarrierSpec::circles(0.025, 0.5, 0.05, [0.0, 0.0], vec![1.0, 0.9], 0.24, 0.0, &profile, &pot).is_err());
        assert!(BarrierSpec::circles(0.025, 0.5, 0.05, [0.0, 0.0], vec![0.6, 1.2], 0.24, 0.0, &profile, &pot).is_err());
        assert!(BarrierSpec::circles(0.025, 0.5, 0.05, [0.0, 0.0], vec![1.0], 0.4, 1.0, &profile, &pot).is_err());
        let mut slow = ok.clone();
        slow.speed *= 0.9;
        assert!(slow.validate(&profile).is_err());
    }

    #[test]
    fn catmull_rom_reproduces_cubics() {
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0;
        for t in [0.0, 0.25, 0.7, 1.0] {
            let w = catmull_rom(t);
            let s: f64 = (0..4).map(|j| w[j] * f(j as f64 - 1.0)).sum();
            // Catmull-Rom is exact for quadratics only
            let q = |x: f64| x * x - 3.0 * x;
            let sq: f64 = (0..4).map(|j| w[j] * q(j as f64 - 1.0)).sum();
            assert!((sq - q(t)).abs() < 1e-14);
            assert!((s - f(t)).abs() < 0.2);
        }
    }

    #[test]
    fn far_outside_value_is_nonpositive_for_wide_clamp() {
        // the layer tail outside is ε/(α(2ρ + σ̃)); a clamp of ρ = 0.95 makes
        // it smaller than σ̃ε|ln ε|
        let (profile, pot) = setup();
        let spec = BarrierSpec::circles(0.025, 0.5, 0.05, [0.0, 0.0], vec![3.0], 0.95, 0.0, &profile, &pot).unwrap();
        let op = LinearizedOperator::new(&profile, &pot).unwrap();
        let mut b = Barrier::new(spec, &profile, &pot);
        let opts = BankOptions {
            window: Some((6.0, 6.5)),
            ..BankOptions::default()
        };
        b.prepare(&op, 0.0, opts).unwrap();
        let v = build_barrier(&b, 0.0, [8.0, 0.0]).unwrap();
        assert!(v <= 0.0, "{v}");
    }
}
