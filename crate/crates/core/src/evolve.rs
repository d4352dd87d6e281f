//! Time integration of the rescaled equation
//!
//! ```text
//! ∂_t u = I_2[u] / (ε |ln ε|) - W'(u) / (ε² |ln ε|)
//! ```
//!
//! by a first-order IMEX spectral scheme, together with the reference front
//! laws it is compared against: the exact shrinking circle and a level-set
//! solver for mean curvature flow.

use crate::error::{invalid, Error, Result};
use crate::field::{GridShape, PeriodicField};
use crate::fracops::SpectralOperator;
use crate::geometry::{
    build_initial_condition, extract_fronts, extract_level, front_statistics, polyline_signed_distance,
    thin_polyline, FrontStats, LoopConfig, Point, Polyline,
};
use crate::layer::LayerProfile;
use crate::potential::Potential;

/// `ε |ln ε|`
pub fn log_scale(eps: f64) -> f64 {
    eps * eps.ln().abs()
}

/// Largest stable step: `ε² |ln ε| / (4 max |W''|)`.
pub fn dt_max(eps: f64, potential: &Potential) -> f64 {
    eps * log_scale(eps) / (4.0 * potential.max_abs_d2w())
}

/// Parameters of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub eps: f64,
    pub l: f64,
    pub m: usize,
    pub dt: f64,
    pub t_final: f64,
    pub loops: LoopConfig,
    /// Time between recorded frames.
    pub output_every: f64,
    /// Stop once every front is extinct or smaller than this effective radius.
    pub stop_radius: f64,
    /// Velocity constant of the limiting flow, from the layer profile.
    pub mu: f64,
}

impl SimConfig {
    /// Largest stable step, 40 frames, `μ` from the profile.
    pub fn new(
        eps: f64,
        l: f64,
        m: usize,
        loops: LoopConfig,
        t_final: f64,
        profile: &LayerProfile,
        potential: &Potential,
    ) -> Result<Self> {
        let cfg = Self {
            eps,
            l,
            m,
            dt: dt_max(eps, potential),
            t_final,
            loops,
            output_every: t_final / 40.0,
            stop_radius: 0.0,
            mu: profile.mu(2),
        };
        cfg.validate(potential)?;
        Ok(cfg)
    }

    pub fn shape(&self) -> Result<GridShape> {
        GridShape::new(self.l, self.m)
    }

    pub fn h(&self) -> f64 {
        self.l / self.m as f64
    }

    pub fn validate(&self, potential: &Potential) -> Result<()> {
        self.shape()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return invalid(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if self.h() > self.eps / 4.0 + 1e-15 {
            return Err(Error::UnderResolved(format!(
                "h = {} exceeds eps/4 = {}",
                self.h(),
                self.eps / 4.0
            )));
        }
        let cap = dt_max(self.eps, potential);
        if !(self.dt > 0.0) || self.dt > cap * (1.0 + 1e-12) {
            return invalid(format!("dt = {} must lie in (0, {cap}]", self.dt));
        }
        if !(self.t_final > 0.0) || !(self.output_every > 0.0) {
            return invalid("t_final and output_every must be positive");
        }
        self.loops.validate(self.l, 4.0 * self.h())
    }
}

/// One IMEX step: explicit reaction, implicit nonlocal term.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: SpectralOperator,
    potential: Potential,
    eps: f64,
    dt: f64,
    ramp: Option<Vec<f64>>,
}

impl Stepper {
    pub fn new(shape: GridShape, potential: Potential, eps: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && eps > 0.0 && eps < 1.0) {
            return invalid("stepper needs 0 < eps < 1 and dt > 0");
        }
        Ok(Self {
            op: SpectralOperator::new(shape)?,
            potential,
            eps,
            dt,
            ramp: None,
        })
    }

    /// Evolves fields with `u(x + L e₁) = u(x) + 1`: the periodic part is
    /// `u - x₁/L`, which the spectral operator sees, while the affine part is
    /// annihilated by `I_2`.
    pub fn with_staircase(mut self) -> Self {
        let shape = self.op.shape();
        let l = shape.l;
        self.ramp = Some(PeriodicField::from_fn(shape, |p| p[0] / l).into_values());
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self, u: &PeriodicField) -> Result<PeriodicField> {
        let ls = log_scale(self.eps);
        let react = self.dt / (self.eps * ls);
        let mut w = u.clone();
        for (k, v) in w.values_mut().iter_mut().enumerate() {
            let r = self.ramp.as_ref().map_or(0.0, |r| r[k]);
            *v += -react * self.potential.dw(*v) - r;
        }
        let kappa = self.op.symbol().kappa;
        let damp = self.dt * kappa / ls;
        let (mut out, _) = self.op.apply_multiplier(&w, |k| 1.0 / (1.0 + damp * k))?;
        if let Some(r) = &self.ramp {
            for (v, r) in out.values_mut().iter_mut().zip(r) {
                *v += r;
            }
        }
        if let Err(e) = out.check_finite("time step") {
            return Err(Error::NonFinite(format!(
                "{e}; input range [{}, {}]",
                u.min(),
                u.max()
            )));
        }
        Ok(out)
    }
}

/// Field plus clock.
#[derive(Debug, Clone)]
pub struct Simulation {
    stepper: Stepper,
    u: PeriodicField,
    t: f64,
    steps: usize,
}

impl Simulation {
    pub fn new(u0: PeriodicField, stepper: Stepper) -> Self {
        Self {
            stepper,
            u: u0,
            t: 0.0,
            steps: 0,
        }
    }

    pub fn from_config(cfg: &SimConfig, profile: &LayerProfile, potential: &Potential) -> Result<Self> {
        cfg.validate(potential)?;
        let shape = cfg.shape()?;
        let u0 = build_initial_condition(&cfg.loops, shape, cfg.eps, profile)?;
        Ok(Self::new(u0, Stepper::new(shape, potential.clone(), cfg.eps, cfg.dt)?))
    }

    pub fn field(&self) -> &PeriodicField {
        &self.u
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self) -> Result<()> {
        self.u = self.stepper.step(&self.u)?;
        self.steps += 1;
        self.t = self.steps as f64 * self.stepper.dt;
        Ok(())
    }

    /// Steps until the clock reaches `t` (to within half a step).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        while self.t + 0.5 * self.stepper.dt < t {
            self.step()?;
        }
        Ok(())
    }
}

/// One recorded time.
#[derive(Debug, Clone)]
pub struct Frame {
    pub t: f64,
    pub fronts: Vec<Option<Polyline>>,
    pub stats: Vec<Option<FrontStats>>,
    /// `plateaus[k]`: mean of `u` where exactly `k` fronts enclose the point,
    /// at least `3ε` away from every front.
    pub plateaus: Vec<Option<f64>>,
}

/// Recorded frames of a run.
#[derive(Debug, Clone)]
pub struct FrontTrace {
    pub n: usize,
    pub eps: f64,
    pub mu: f64,
    pub frames: Vec<Frame>,
    pub min_value: f64,
    pub max_value: f64,
    pub steps: usize,
}

impl FrontTrace {
    /// `(t, effective radius)` of front `i` (0-based) while it exists.
    pub fn radius_series(&self, i: usize) -> Vec<(f64, f64)> {
        self.frames
            .iter()
            .filter_map(|f| f.stats.get(i).and_then(|s| s.as_ref()).map(|s| (f.t, s.mean_radius)))
            .collect()
    }

    /// `(t, plateau)` for region `k` while it can be measured.
    pub fn plateau_series(&self, k: usize) -> Vec<(f64, f64)> {
        self.frames
            .iter()
            .filter_map(|f| f.plateaus.get(k).and_then(|p| p.map(|v| (f.t, v))))
            .collect()
    }
}

/// Extracts fronts, their statistics, and plateau averages from a field.
pub fn measure_frame(u: &PeriodicField, n: usize, eps: f64, t: f64) -> Frame {
    let fronts = extract_fronts(u, n);
    let stats: Vec<Option<FrontStats>> = fronts
        .iter()
        .map(|f| f.as_ref().and_then(|p| front_statistics(p).ok()))
        .collect();
    let plateaus = plateau_averages(u, &fronts, eps);
    Frame {
        t,
        fronts,
        stats,
        plateaus,
    }
}

/// Plateau means on a sub-lattice of about 128² points.
pub fn plateau_averages(u: &PeriodicField, fronts: &[Option<Polyline>], eps: f64) -> Vec<Option<f64>> {
    let n = fronts.len();
    let shape = u.shape();
    let stride = (shape.m / 128).max(1);
    let thin: Vec<Option<Polyline>> = fronts
        .iter()
        .map(|f| f.as_ref().map(|p| thin_polyline(p, 0.5 * eps)))
        .collect();
    let margin = 3.0 * eps;
    let mut sum = vec![0.0; n + 1];
    let mut count = vec![0usize; n + 1];
    for j in (0..shape.m).step_by(stride) {
        for i in (0..shape.m).step_by(stride) {
            let p: Point = shape.point(i, j);
            let mut inside = 0;
            let mut ok = true;
            for f in thin.iter().flatten() {
                let s = polyline_signed_distance(f, p);
                if s.abs() < margin {
                    ok = false;
                    break;
                }
                if s > 0.0 {
                    inside += 1;
                }
            }
            if ok {
                sum[inside] += u.at(i, j);
                count[inside] += 1;
            }
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect()
}

/// Integrates from the nested-loop initial datum and records frames.
pub fn run_simulation(cfg: &SimConfig, profile: &LayerProfile, potential: &Potential) -> Result<FrontTrace> {
    let mut sim = Simulation::from_config(cfg, profile, potential)?;
    run_from(&mut sim, cfg)
}

/// Continues an existing simulation under `cfg`'s output and stopping rules.
pub fn run_from(sim: &mut Simulation, cfg: &SimConfig) -> Result<FrontTrace> {
    let n = cfg.loops.len();
    let mut trace = FrontTrace {
        n,
        eps: cfg.eps,
        mu: cfg.mu,
        frames: Vec::new(),
        min_value: sim.field().min(),
        max_value: sim.field().max(),
        steps: 0,
    };
    let mut next_output = sim.time();
    loop {
        if sim.time() + 0.5 * cfg.dt >= next_output {
            let frame = measure_frame(sim.field(), n, cfg.eps, sim.time());
            let done = frame
                .stats
                .iter()
                .all(|s| s.as_ref().is_none_or(|s| s.mean_radius < cfg.stop_radius));
            trace.frames.push(frame);
            next_output += cfg.output_every;
            if done {
                break;
            }
        }
        if sim.time() + 0.5 * cfg.dt >= cfg.t_final {
            break;
        }
        sim.step()?;
        trace.min_value = trace.min_value.min(sim.field().min());
        trace.max_value = trace.max_value.max(sim.field().max());
    }
    trace.steps = sim.steps();
    Ok(trace)
}

/// `√(R0² - 2μt)`.
pub fn exact_circle_radius(r0: f64, mu: f64, t: f64) -> Result<f64> {
    let s = r0 * r0 - 2.0 * mu * t;
    if t < 0.0 || s < -1e-12 * r0 * r0 {
        return invalid(format!("t = {t} lies outside [0, {}]", r0 * r0 / (2.0 * mu)));
    }
    Ok(s.max(0.0).sqrt())
}

/// Explicit level-set mean curvature flow with the largest stable step
/// `h²/(8μ)` (shortened to land on `T`).
pub fn mcf_levelset_reference(d0: &PeriodicField, mu: f64, t: f64) -> Result<PeriodicField> {
    let h = d0.h();
    let cap = h * h / (8.0 * mu);
    let steps = (t / cap).ceil().max(1.0);
    // T = 0 takes no steps; any admissible dt will do
    let dt = if t > 0.0 { t / steps } else { cap };
    mcf_levelset_reference_dt(d0, mu, t, dt)
}

pub fn mcf_levelset_reference_dt(d0: &PeriodicField, mu: f64, t: f64, dt: f64) -> Result<PeriodicField> {
    let h = d0.h();
    if !(mu > 0.0 && t >= 0.0 && dt > 0.0) {
        return invalid("level-set flow needs mu > 0, T >= 0, dt > 0");
    }
    if dt > h * h / (8.0 * mu) * (1.0 + 1e-12) {
        return invalid(format!("dt = {dt} violates the bound h²/(8μ) = {}", h * h / (8.0 * mu)));
    }
    d0.check_finite("level-set initial datum")?;
    const DELTA2: f64 = 1e-12;
    let shape = d0.shape();
    let m = shape.m as isize;
    let steps = (t / dt).round() as usize;
    let mut u = d0.clone();
    let mut next = u.values().to_vec();
    for _ in 0..steps {
        for j in 0..m {
            for i in 0..m {
                let c = u.at(i as usize, j as usize);
                let e = u.at_wrapped(i + 1, j);
                let w = u.at_wrapped(i - 1, j);
                let nn = u.at_wrapped(i, j + 1);
                let s = u.at_wrapped(i, j - 1);
                let ux = (e - w) / (2.0 * h);
                let uy = (nn - s) / (2.0 * h);
                let uxx = (e - 2.0 * c + w) / (h * h);
                let uyy = (nn - 2.0 * c + s) / (h * h);
                let uxy = (u.at_wrapped(i + 1, j + 1) - u.at_wrapped(i + 1, j - 1) - u.at_wrapped(i - 1, j + 1)
                    + u.at_wrapped(i - 1, j - 1))
                    / (4.0 * h * h);
                let flux = (uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / (ux * ux + uy * uy + DELTA2);
                next[(j * m + i) as usize] = c + dt * mu * flux;
            }
        }
        u.values_mut().copy_from_slice(&next);
    }
    Ok(u)
}

/// Zero level set of a level-set field.
pub fn zero_level(u: &PeriodicField) -> Option<Polyline> {
    extract_level(u, 0.0)
}

/// One row of an interaction study.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftRow {
    pub eps: f64,
    pub separation: f64,
    /// Largest `|R_pair(t) - R_single(t)| / R_inner(0)` over common frames.
    pub deviation: f64,
    /// `deviation · |ln ε|`
    pub scaled: f64,
}

/// Setup of an interaction study: an inner circle alone versus the same
/// circle with a concentric outer companion.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftStudy {
    pub l: f64,
    pub center: Point,
    pub inner_radius: f64,
    /// Track the inner front until its single-front radius falls below this
    /// fraction of the initial radius.
    pub stop_fraction: f64,
}

impl Default for DriftStudy {
    fn default() -> Self {
        Self {
            l: 4.0,
            center: [2.0, 2.0],
            inner_radius: 0.4,
            stop_fraction: 0.5,
        }
    }
}

/// Smallest power-of-two `M` with `L/M ≤ ε/4`.
pub fn resolution_for(eps: f64, l: f64) -> usize {
    let mut m = 16;
    while l / m as f64 > eps / 4.0 {
        m *= 2;
    }
    m
}

impl DriftStudy {
    fn inner_track(
        &self,
        eps: f64,
        radii: &[f64],
        profile: &LayerProfile,
        potential: &Potential,
    ) -> Result<Vec<(f64, f64)>> {
        let loops = LoopConfig::concentric(self.center, radii)?;
        let mu = profile.mu(2);
        let t_end = (1.0 - self.stop_fraction.powi(2)) * self.inner_radius.powi(2) / (2.0 * mu);
        let mut cfg = SimConfig::new(eps, self.l, resolution_for(eps, self.l), loops, t_end, profile, potential)?;
        cfg.output_every = t_end / 20.0;
        let trace = run_simulation(&cfg, profile, potential)?;
        Ok(trace.radius_series(radii.len() - 1))
    }

    /// Deviation of the inner front caused by an outer front at distance
    /// `separation`; `None` runs the single front against itself.
    pub fn row(
        &self,
        eps: f64,
        separation: Option<f64>,
        profile: &LayerProfile,
        potential: &Potential,
    ) -> Result<DriftRow> {
        let single = self.inner_track(eps, &[self.inner_radius], profile, potential)?;
        let pair = match separation {
            Some(s) => self.inner_track(eps, &[self.inner_radius + s, self.inner_radius], profile, potential)?,
            None => single.clone(),
        };
        let deviation = single
            .iter()
            .zip(&pair)
            .map(|(a, b)| (a.1 - b.1).abs() / self.inner_radius)
            .fold(0.0, f64::max);
        Ok(DriftRow {
            eps,
            separation: separation.unwrap_or(f64::INFINITY),
            deviation,
            scaled: deviation * eps.ln().abs(),
        })
    }
}

/// Runs the study over every `(ε, separation)` pair.
pub fn interaction_drift_study(
    study: &DriftStudy,
    eps_values: &[f64],
    separations: &[f64],
    profile: &LayerProfile,
    potential: &Potential,
) -> Result<Vec<DriftRow>> {
    let mut rows = Vec::new();
    for &eps in eps_values {
        for &s in separations {
            rows.push(study.row(eps, Some(s), profile, potential)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_radius_formula() {
        let mu = 2.0 * PI;
        assert_eq!(exact_circle_radius(1.0, mu, 0.0).unwrap(), 1.0);
        assert!(exact_circle_radius(1.0, mu, 1.0 / (2.0 * mu)).unwrap().abs() < 1e-12);
        // 2μt = 1/4 at t = 1/(16π)
        assert!((exact_circle_radius(1.0, mu, 1.0 / (16.0 * PI)).unwrap() - 0.75f64.sqrt()).abs() < 1e-14);
        assert!(exact_circle_radius(1.0, mu, 1.0).is_err());
    }

    #[test]
    fn integer_constants_are_fixed_points() {
        let w = Potential::calibrated_cosine(2).unwrap();
        let shape = GridShape::new(4.0, 32).unwrap();
        let mut st = Stepper::new(shape, w, 0.1, 1e-4).unwrap();
        for k in [0.0, 1.0, 3.0] {
            let u = PeriodicField::constant(shape, k);
            let v = st.step(&u).unwrap();
            assert!(v.values().iter().all(|&x| (x - k).abs() < 1e-13));
        }
    }

    #[test]
    fn rejects_under_resolved_config() {
        let w = Potential::calibrated_cosine(2).unwrap();
        let p = LayerProfile::tabulate_exact(200.0, 2001).unwrap();
        let loops = LoopConfig::concentric([2.0, 2.0], &[1.0]).unwrap();
        assert!(SimConfig::new(0.025, 4.0, 256, loops.clone(), 0.01, &p, &w).is_err());
        assert!(SimConfig::new(0.1, 4.0, 256, loops, 0.01, &p, &w).is_ok());
    }

    #[test]
    fn mcf_rejects_large_steps() {
        let shape = GridShape::new(4.0, 32).unwrap();
        let d = PeriodicField::constant(shape, 0.0);
        assert!(mcf_levelset_reference_dt(&d, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn mcf_keeps_straight_front() {
        let shape = GridShape::new(4.0, 64).unwrap();
        // a tent keeps the field periodic; fronts at x = 1 and x = 3
        let d0 = PeriodicField::from_fn(shape, |p| 1.0 - (p[0] - 2.0).abs());
        let d = mcf_levelset_reference(&d0, 2.0 * PI, 0.01).unwrap();
        for j in 0..64 {
            assert!((d.at(16, j) - d0.at(16, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn mcf_at_time_zero_is_the_datum() {
        let shape = GridShape::new(4.0, 32).unwrap();
        let d0 = PeriodicField::from_fn(shape, |p| 1.0 - (p[0] - 2.0).abs());
        assert_eq!(mcf_levelset_reference(&d0, 2.0 * PI, 0.0).unwrap(), d0);
    }
}
