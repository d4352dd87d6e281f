//! Batch experiments: named presets over the library, each producing CSV
//! tables, a JSON manifest and PASS/FAIL checks against its thresholds.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::aeps::{a_bar_eps, abar_limit, AepsParams, OverlapKernel};
use crate::barriers::{check_subsolution, plateau_check, stratified_samples, BankOptions, Barrier, BarrierSpec};
use crate::config::{parse_text, Kind, Param, Settings};
use crate::corrector::{
    apply_l_by_quadrature, g_decay_fit, manufactured_chi, psi_decay_fit, solve_corrector, solve_nodal,
    CorrectorProblem, LinearizedOperator,
};
use crate::error::{invalid, Error, Result};
use crate::evolve::{exact_circle_radius, interaction_drift_study, run_simulation, DriftStudy, FrontTrace, SimConfig};
use crate::field::{GridShape, PeriodicField};
use crate::fracops::{compute_cn, frac_lap_quadrature_2d, frac_lap_spectral, ImageCorrection, SpectralSymbol};
use crate::geometry::{ClampedCircle, LoopConfig};
use crate::layer::LayerProfile;
use crate::potential::Potential;

/// Environment variable naming the root under which relative output
/// directories are created.
pub const OUTPUT_ROOT_ENV: &str = "PNFLOW_OUTPUT_ROOT";

/// Exit status of a run whose checks all passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status of a completed run with at least one failed check.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for a rejected configuration.
pub const EXIT_INVALID: i32 = 2;
/// Exit status for a numerical abort.
pub const EXIT_NUMERICAL: i32 = 3;

/// Maps a library error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) | Error::NoConvergence { .. } | Error::Singular(_) => EXIT_NUMERICAL,
        Error::InvalidInput(_) | Error::UnderResolved(_) | Error::Parse(_) | Error::Io(_) => EXIT_INVALID,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Preset {
    OperatorValidation,
    CircleLaw,
    NestedIndependence,
    AbarConvergence,
    CorrectorStudy,
    BarrierCheck,
    InteractionDrift,
}

pub const PRESETS: [Preset; 7] = [
    Preset::OperatorValidation,
    Preset::CircleLaw,
    Preset::NestedIndependence,
    Preset::AbarConvergence,
    Preset::CorrectorStudy,
    Preset::BarrierCheck,
    Preset::InteractionDrift,
];

const COMMON: &[Param] = &[
    Param::new("output.dir", Kind::Text, "", "output directory; empty uses the preset name"),
    Param::new("output.snapshots", Kind::Bool, "false", "write binary field snapshots of simulations"),
    Param::new("seed", Kind::Int, "1", "seed for randomized sample sets"),
    Param::new("layer.half_width", Kind::Float, "200", "half width of the tabulated layer profile"),
    Param::new("layer.nodes", Kind::Int, "801", "nodes of the tabulated layer profile"),
];

const OPERATOR: &[Param] = &[
    Param::new("op.l", Kind::Float, "4", "box side"),
    Param::new("op.m", Kind::Int, "256", "grid points per side"),
    Param::new("op.modes", Kind::FloatList, "1,2,5,17", "wave numbers of the cosine eigenmodes"),
    Param::new("op.width", Kind::Float, "0.15", "standard deviation of the Gaussian"),
    Param::new("op.points", Kind::Int, "4", "random comparison points besides the center"),
    Param::new("op.spread", Kind::Float, "0.3", "largest offset of a comparison point from the center"),
    Param::new("op.radius", Kind::Float, "1.9", "truncation radius of the quadrature"),
    Param::new("check.eigen_tol", Kind::Float, "1e-10", "relative eigenvalue tolerance"),
    Param::new("check.quad_tol", Kind::Float, "1e-4", "relative spectral-vs-quadrature tolerance"),
];

const CIRCLE: &[Param] = &[
    Param::new("sim.eps", Kind::Float, "0.025", "interface width"),
    Param::new("sim.l", Kind::Float, "4", "box side"),
    Param::new("sim.m", Kind::Int, "1024", "grid points per side"),
    Param::new("sim.r0", Kind::Float, "1", "initial radius"),
    Param::new("sim.stop_radius", Kind::Float, "0.3", "compare until the radius falls to this value"),
    Param::new("sim.frames", Kind::Int, "40", "recorded frames"),
    Param::new("sim.trend_eps", Kind::FloatList, "", "extra eps values for the reported trend"),
    Param::new("check.tol", Kind::Float, "0.05", "relative tolerance on R²"),
];

const NESTED: &[Param] = &[
    Param::new("sim.eps", Kind::Float, "0.025", "interface width"),
    Param::new("sim.l", Kind::Float, "4", "box side"),
    Param::new("sim.m", Kind::Int, "1024", "grid points per side"),
    Param::new("sim.radii", Kind::FloatList, "0.95,0.65,0.35", "initial radii, outermost first"),
    Param::new("sim.shrink", Kind::Float, "0.5", "stop when the inner circle's exact radius reaches this fraction"),
    Param::new("sim.frames", Kind::Int, "20", "recorded frames"),
    Param::new("check.plateau_factor", Kind::Float, "3", "plateau tolerance in units of eps|ln eps|"),
    Param::new("check.independence_tol", Kind::Float, "0.02", "relative tolerance against the single-front control"),
];

const ABAR: &[Param] = &[
    Param::new("abar.radius", Kind::Float, "1", "circle radius"),
    Param::new("abar.rho", Kind::Float, "0.4", "clamp scale of the distance function"),
    Param::new("abar.gamma", Kind::Float, "0.5", "truncation radius of the kernel integral"),
    Param::new("abar.eps", Kind::FloatList, "0.1,0.05,0.025,0.0125", "eps sweep, decreasing"),
    Param::new("abar.angles", Kind::Int, "1", "front points per eps"),
    Param::new("check.tol", Kind::Float, "0.15", "largest admissible error at the smallest eps"),
];

const CORRECTOR: &[Param] = &[
    Param::new("cor.eps", Kind::Float, "0.05", "interface width"),
    Param::new("cor.radius", Kind::Float, "1", "circle radius"),
    Param::new("cor.rho", Kind::Float, "0.4", "clamp scale"),
    Param::new("cor.gamma", Kind::Float, "0.5", "kernel truncation radius"),
    Param::new("cor.sigma_tilde", Kind::Float, "0.05", "front shift"),
    Param::new("cor.xi_max", Kind::Float, "60", "extent of the a_eps table"),
    Param::new("cor.xi_nodes", Kind::Int, "61", "a_eps samples"),
    Param::new("cor.profile_nodes", Kind::Int, "1201", "collocation nodes of the linearized operator"),
    Param::new("cor.manufactured_width", Kind::Float, "6", "support of the manufactured solution"),
    Param::new("check.orthogonality_tol", Kind::Float, "1e-6", "bound on |∫ g φ'|"),
    Param::new("check.manufactured_tol", Kind::Float, "1e-4", "bound on the manufactured-solution error"),
    Param::new("check.kernel_tol", Kind::Float, "1e-5", "bound on the kernel residual"),
];

const BARRIER: &[Param] = &[
    Param::new("barrier.eps", Kind::Float, "0.025", "interface width"),
    Param::new("barrier.sigma_tilde", Kind::Float, "0.05", "front shift"),
    Param::new("barrier.gamma", Kind::Float, "0.5", "kernel truncation radius"),
    Param::new("barrier.single.radii", Kind::FloatList, "6", "radii of the single-front spec"),
    Param::new("barrier.single.rho", Kind::Float, "2.5", "clamp scale of the single-front spec"),
    Param::new("barrier.single.l", Kind::Float, "24", "box side for the single-front spec"),
    Param::new("barrier.single.m", Kind::Int, "4096", "grid points per side for the single-front spec"),
    Param::new("barrier.nested.radii", Kind::FloatList, "17,6", "radii of the nested spec"),
    Param::new("barrier.nested.rho", Kind::Float, "2.5", "clamp scale of the nested spec"),
    Param::new("barrier.nested.l", Kind::Float, "48", "box side for the nested spec"),
    Param::new("barrier.nested.m", Kind::Int, "8192", "grid points per side for the nested spec"),
    Param::new("barrier.plateau.radii", Kind::FloatList, "15,7.5", "radii of the nested plateau spec"),
    Param::new("barrier.plateau.rho", Kind::Float, "3.6", "clamp scale of the nested plateau spec"),
    Param::new("barrier.band_stride", Kind::Int, "4", "grid stride of band samples"),
    Param::new("barrier.lattice_stride", Kind::Int, "40", "grid stride of lattice samples"),
    Param::new("barrier.random_samples", Kind::Int, "2000", "seeded random lattice samples"),
    Param::new("barrier.dt_factor", Kind::Float, "0.02", "time difference step in units of eps/C"),
    Param::new("barrier.horizon", Kind::Float, "0.01", "time span the shrinking speed must cover"),
    Param::new("barrier.unit_circle", Kind::Bool, "false", "also report the R = 1, rho = 0.4 regime row"),
];

const DRIFT: &[Param] = &[
    Param::new("drift.eps", Kind::FloatList, "0.1,0.05,0.025", "eps sweep, decreasing"),
    Param::new("drift.separations", Kind::FloatList, "0.25,0.5", "front separations, increasing"),
    Param::new("drift.inner_radius", Kind::Float, "0.4", "radius of the tracked inner circle"),
    Param::new("drift.l", Kind::Float, "4", "box side"),
    Param::new("drift.stop_fraction", Kind::Float, "0.5", "track until the single front shrinks to this fraction"),
];

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::OperatorValidation => "operator-validation",
            Preset::CircleLaw => "circle-law",
            Preset::NestedIndependence => "nested-independence",
            Preset::AbarConvergence => "abar-convergence",
            Preset::CorrectorStudy => "corrector-study",
            Preset::BarrierCheck => "barrier-check",
            Preset::InteractionDrift => "interaction-drift",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::OperatorValidation => "spectral half-Laplacian against cosine eigenmodes and free-space quadrature",
            Preset::CircleLaw => "shrinking circle against R² = R0² - 2μt",
            Preset::NestedIndependence => "nested circles: plateau values and the inner front against a single-front control",
            Preset::AbarConvergence => "curvature term ā_ε on a circle approaching its limit as ε decreases",
            Preset::CorrectorStudy => "corrector solvability, kernel, manufactured solution and decay",
            Preset::BarrierCheck => "subsolution residual and plateau bound of shrinking-circle barriers",
            Preset::InteractionDrift => "inner-front deviation caused by a concentric companion across ε",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        PRESETS
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset '{name}'")))
    }

    /// Declared keys: the common ones followed by the preset's own.
    pub fn params(self) -> Vec<Param> {
        let own = match self {
            Preset::OperatorValidation => OPERATOR,
            Preset::CircleLaw => CIRCLE,
            Preset::NestedIndependence => NESTED,
            Preset::AbarConvergence => ABAR,
            Preset::CorrectorStudy => CORRECTOR,
            Preset::BarrierCheck => BARRIER,
            Preset::InteractionDrift => DRIFT,
        };
        COMMON.iter().chain(own).copied().collect()
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub settings: Settings,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Builds a configuration from raw `key = value` pairs. The preset comes
    /// from `preset` unless `preset_override` is given; overrides replace
    /// file values. Relative output directories are placed under `root`.
    pub fn from_raw(
        mut raw: BTreeMap<String, String>,
        preset_override: Option<&str>,
        overrides: &[(String, String)],
        root: &Path,
    ) -> Result<Self> {
        for (k, v) in overrides {
            raw.insert(k.clone(), v.clone());
        }
        let from_file = raw.remove("preset");
        let name = preset_override
            .map(str::to_string)
            .or(from_file)
            .ok_or_else(|| Error::InvalidInput("no preset given".into()))?;
        let preset = Preset::from_name(&name)?;
        let settings = Settings::resolve(&preset.params(), &raw)?;
        let dir = settings.text("output.dir");
        let dir = if dir.is_empty() { preset.name() } else { dir };
        let output_dir = root.join(dir);
        let seed = settings.int("seed") as u64;
        let cfg = Self {
            preset,
            settings,
            output_dir,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a configuration file body plus overrides.
    pub fn from_text(
        text: &str,
        preset_override: Option<&str>,
        overrides: &[(String, String)],
        root: &Path,
    ) -> Result<Self> {
        Self::from_raw(parse_text(text)?, preset_override, overrides, root)
    }

    /// Defaults of `preset` with overrides.
    pub fn preset(preset: Preset, overrides: &[(String, String)], root: &Path) -> Result<Self> {
        Self::from_raw(BTreeMap::new(), Some(preset.name()), overrides, root)
    }

    /// Range checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let s = &self.settings;
        let positive = |key: &str| -> Result<()> {
            if s.float(key) > 0.0 {
                Ok(())
            } else {
                invalid(format!("{key} must be positive"))
            }
        };
        let eps_ok = |key: &str, v: f64| -> Result<()> {
            if v > 0.0 && v < 0.5 {
                Ok(())
            } else {
                invalid(format!("{key} must lie in (0, 0.5), got {v}"))
            }
        };
        positive("layer.half_width")?;
        if s.int("layer.nodes") < 101 || s.int("layer.nodes").is_multiple_of(2) {
            return invalid("layer.nodes must be odd and at least 101");
        }
        match self.preset {
            Preset::OperatorValidation => {
                for k in ["op.l", "op.width", "op.radius", "check.eigen_tol", "check.quad_tol"] {
                    positive(k)?;
                }
                GridShape::new(s.float("op.l"), s.int("op.m"))?;
                if s.list("op.modes").iter().any(|&k| !(k >= 1.0 && k.fract() == 0.0)) {
                    return invalid("op.modes must be positive integers");
                }
                if 2.0 * s.list("op.modes").iter().fold(0.0f64, |a, &b| a.max(b)) >= s.int("op.m") as f64 {
                    return invalid("op.modes must stay below the Nyquist wave number");
                }
            }
            Preset::CircleLaw => {
                eps_ok("sim.eps", s.float("sim.eps"))?;
                for &e in s.list("sim.trend_eps") {
                    eps_ok("sim.trend_eps", e)?;
                }
                for k in ["sim.l", "sim.r0", "sim.stop_radius", "check.tol"] {
                    positive(k)?;
                }
                GridShape::new(s.float("sim.l"), s.int("sim.m"))?;
                if s.float("sim.stop_radius") >= s.float("sim.r0") {
                    return invalid("sim.stop_radius must be below sim.r0");
                }
            }
            Preset::NestedIndependence => {
                eps_ok("sim.eps", s.float("sim.eps"))?;
                GridShape::new(s.float("sim.l"), s.int("sim.m"))?;
                let r = s.list("sim.radii");
                if r.is_empty() || r.windows(2).any(|w| w[0] <= w[1]) || r.iter().any(|&x| x <= 0.0) {
                    return invalid("sim.radii must be positive and strictly decreasing");
                }
                let f = s.float("sim.shrink");
                if !(f > 0.0 && f < 1.0) {
                    return invalid("sim.shrink must lie in (0, 1)");
                }
            }
            Preset::AbarConvergence => {
                let e = s.list("abar.eps");
                if e.len() < 2 || e.windows(2).any(|w| w[0] <= w[1]) {
                    return invalid("abar.eps needs at least two strictly decreasing values");
                }
                for &v in e {
                    eps_ok("abar.eps", v)?;
                }
                for k in ["abar.radius", "abar.rho", "abar.gamma", "check.tol"] {
                    positive(k)?;
                }
                if s.int("abar.angles") == 0 {
                    return invalid("abar.angles must be positive");
                }
            }
            Preset::CorrectorStudy => {
                eps_ok("cor.eps", s.float("cor.eps"))?;
                for k in ["cor.radius", "cor.rho", "cor.gamma", "cor.xi_max", "cor.manufactured_width"] {
                    positive(k)?;
                }
                if s.int("cor.xi_nodes") < 5 || s.int("cor.profile_nodes") < 101 {
                    return invalid("cor.xi_nodes must be at least 5 and cor.profile_nodes at least 101");
                }
            }
            Preset::BarrierCheck => {
                eps_ok("barrier.eps", s.float("barrier.eps"))?;
                for k in ["barrier.sigma_tilde", "barrier.gamma", "barrier.dt_factor", "barrier.horizon"] {
                    positive(k)?;
                }
                for spec in ["single", "nested"] {
                    GridShape::new(s.float(&format!("barrier.{spec}.l")), s.int(&format!("barrier.{spec}.m")))?;
                }
            }
            Preset::InteractionDrift => {
                let e = s.list("drift.eps");
                let sep = s.list("drift.separations");
                if e.is_empty() || e.windows(2).any(|w| w[0] <= w[1]) {
                    return invalid("drift.eps must be strictly decreasing");
                }
                for &v in e {
                    eps_ok("drift.eps", v)?;
                }
                if sep.is_empty() || sep.windows(2).any(|w| w[0] >= w[1]) || sep[0] <= 0.0 {
                    return invalid("drift.separations must be positive and strictly increasing");
                }
                positive("drift.inner_radius")?;
                positive("drift.l")?;
            }
        }
        Ok(())
    }
}

/// One PASS/FAIL line. Informational checks are reported but do not decide
/// the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<="` or `">="`
    pub relation: &'static str,
    pub pass: bool,
    pub informational: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            relation: "<=",
            pass: value <= threshold,
            informational: false,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            relation: ">=",
            pass: value >= threshold,
            informational: false,
        }
    }

    /// A yes/no property, recorded as value 1 or 0 against threshold 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn line(&self) -> String {
        let tag = match (self.pass, self.informational) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (true, true) => "INFO-PASS",
            (false, true) => "INFO-FAIL",
        };
        format!("{tag} {}: {:.6e} {} {:.6e}", self.name, self.value, self.relation, self.threshold)
    }
}

/// Numeric table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.10e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Results of a preset run, before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    /// Derived constants consumed by the run.
    pub constants: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.informational)
    }

    pub fn exit_status(&self) -> i32 {
        if self.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        let _ = writeln!(s, "{}", if self.passed() { "OVERALL PASS" } else { "OVERALL FAIL" });
        s
    }

    fn table(&mut self, name: &str, t: &Table) {
        self.files.push((name.to_string(), t.to_csv().into_bytes()));
    }

    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Kinds of long-format plot data derived from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `(front, t, radius)`
    Radius,
    /// `(region, t, value)`, region = number of enclosing fronts
    Plateau,
    /// `(t, front, vertex, x, y)`
    Contours,
}

/// Long-format plot table of one kind.
pub fn emit_plot_data(trace: &FrontTrace, kind: PlotKind) -> Result<Table> {
    if trace.frames.is_empty() {
        return invalid("empty trace: nothing to plot");
    }
    Ok(match kind {
        PlotKind::Radius => {
            let mut t = Table::new(&["front", "t", "radius"]);
            for i in 0..trace.n {
                for (time, r) in trace.radius_series(i) {
                    t.push(vec![i as f64, time, r]);
                }
            }
            t
        }
        PlotKind::Plateau => {
            let mut t = Table::new(&["region", "t", "value"]);
            for k in 0..=trace.n {
                for (time, v) in trace.plateau_series(k) {
                    t.push(vec![k as f64, time, v]);
                }
            }
            t
        }
        PlotKind::Contours => {
            let mut t = Table::new(&["t", "front", "vertex", "x", "y"]);
            for f in &trace.frames {
                for (i, poly) in f.fronts.iter().enumerate() {
                    for (k, p) in poly.iter().flatten().enumerate() {
                        t.push(vec![f.t, i as f64, k as f64, p[0], p[1]]);
                    }
                }
            }
            t
        }
    })
}

/// Profile, potential and the constants every preset records.
struct Context {
    potential: Potential,
    profile: LayerProfile,
}

impl Context {
    fn new(s: &Settings, nodes: usize) -> Result<(Self, BTreeMap<String, f64>)> {
        let potential = Potential::calibrated_cosine(2)?;
        let profile = LayerProfile::tabulate_exact(s.float("layer.half_width"), nodes)?;
        let mut c = BTreeMap::new();
        c.insert("C_n".to_string(), compute_cn(2)?);
        c.insert("kappa".to_string(), SpectralSymbol::for_dimension(2)?.kappa);
        c.insert("W''(0)".to_string(), potential.d2w(0.0));
        c.insert("alpha".to_string(), profile.alpha());
        c.insert("alpha_fit".to_string(), profile.fit_alpha());
        c.insert("c0".to_string(), profile.c0());
        c.insert("mu".to_string(), profile.mu(2));
        Ok((Self { potential, profile }, c))
    }
}

/// Runs the configured preset.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = &cfg.settings;
    let nodes = match cfg.preset {
        Preset::CorrectorStudy => s.int("cor.profile_nodes"),
        _ => s.int("layer.nodes"),
    };
    let (ctx, constants) = Context::new(s, nodes)?;
    let mut out = Outcome {
        constants,
        ..Outcome::default()
    };
    match cfg.preset {
        Preset::OperatorValidation => operator_validation(s, cfg.seed, &mut out)?,
        Preset::CircleLaw => circle_law(s, &ctx, &mut out)?,
        Preset::NestedIndependence => nested_independence(s, &ctx, &mut out)?,
        Preset::AbarConvergence => abar_convergence(s, &ctx, &mut out)?,
        Preset::CorrectorStudy => corrector_study(s, &ctx, &mut out)?,
        Preset::BarrierCheck => barrier_check(s, cfg.seed, &ctx, &mut out)?,
        Preset::InteractionDrift => interaction_drift(s, &ctx, &mut out)?,
    }
    Ok(out)
}

/// Writes every output file, `summary.txt` and `manifest.json` into the
/// output directory; returns the paths in write order.
pub fn write_outputs(cfg: &ExperimentConfig, out: &Outcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut written = Vec::new();
    for (name, bytes) in &out.files {
        let p = cfg.output_dir.join(name);
        std::fs::write(&p, bytes)?;
        written.push(p);
    }
    let p = cfg.output_dir.join("summary.txt");
    std::fs::write(&p, out.summary())?;
    written.push(p);
    let p = cfg.output_dir.join("manifest.json");
    std::fs::write(&p, manifest(cfg, out))?;
    written.push(p);
    Ok(written)
}

/// Run manifest: configuration, derived constants, checks and file list.
pub fn manifest(cfg: &ExperimentConfig, out: &Outcome) -> String {
    let settings: BTreeMap<&str, String> = cfg.settings.iter().map(|(k, v)| (k, v.to_string())).collect();
    let checks: Vec<_> = out
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "value": c.value,
                "threshold": c.threshold,
                "relation": c.relation,
                "pass": c.pass,
                "informational": c.informational,
            })
        })
        .collect();
    let files: Vec<&str> = out.files.iter().map(|(n, _)| n.as_str()).collect();
    let m = json!({
        "preset": cfg.preset.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "settings": settings,
        "constants": out.constants,
        "checks": checks,
        "files": files,
        "pass": out.passed(),
    });
    let mut s = serde_json::to_string_pretty(&m).expect("manifest serializes");
    s.push('\n');
    s
}

fn operator_validation(s: &Settings, seed: u64, out: &mut Outcome) -> Result<()> {
    let shape = GridShape::new(s.float("op.l"), s.int("op.m"))?;
    let l = shape.l;
    let kappa = SpectralSymbol::for_dimension(2)?.kappa;

    let mut eig = Table::new(&["mode", "expected", "measured", "rel_error"]);
    let mut worst_eig = 0.0f64;
    for &k in s.list("op.modes") {
        let w = 2.0 * PI * k / l;
        let f = PeriodicField::from_fn(shape, |p| (w * p[0]).cos());
        let g = frac_lap_spectral(&f)?;
        let expected = -kappa * w;
        // every node with |f| > 1/2 gives the ratio; the worst one is kept
        let mut measured = expected;
        let mut err = 0.0f64;
        for (a, b) in f.values().iter().zip(g.values()) {
            if a.abs() > 0.5 {
                let r = b / a;
                let e = ((r - expected) / expected).abs();
                if e >= err {
                    err = e;
                    measured = r;
                }
            }
        }
        worst_eig = worst_eig.max(err);
        eig.push(vec![k, expected, measured, err]);
    }
    out.checks.push(Check::at_most("cosine eigenvalues", worst_eig, s.float("check.eigen_tol")));
    out.table("eigenvalues.csv", &eig);

    let c = shape.center();
    let s2 = s.float("op.width").powi(2);
    let gauss = move |p: [f64; 2]| (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (2.0 * s2)).exp();
    let f = PeriodicField::from_fn(shape, gauss);
    let spectral = frac_lap_spectral(&f)?;
    let images = ImageCorrection::new(&f, c, 0.0);
    let center = ((c[0] / shape.h()).round() as usize, (c[1] / shape.h()).round() as usize);
    let mut nodes = vec![center];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = (s.float("op.spread") / shape.h()).floor() as i64;
    for _ in 0..s.int("op.points") {
        let di = rng.random_range(-reach..=reach);
        let dj = rng.random_range(-reach..=reach);
        nodes.push(((center.0 as i64 + di) as usize, (center.1 as i64 + dj) as usize));
    }
    let radius = s.float("op.radius");
    let sd = s.float("op.width");
    let breaks: Vec<f64> = [sd / 3.0, sd, 2.0 * sd, 4.0 * sd, 6.5 * sd]
        .into_iter()
        .filter(|&b| b < radius)
        .collect();
    let mut quad = Table::new(&["x", "y", "spectral", "quadrature", "abs_error"]);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for (i, j) in nodes {
        let x = shape.point(i, j);
        let sp = spectral.at(i, j) - images.at(x);
        let q = frac_lap_quadrature_2d(&gauss, x, radius, &breaks);
        worst = worst.max((sp - q).abs());
        scale = scale.max(q.abs());
        quad.push(vec![x[0], x[1], sp, q, (sp - q).abs()]);
    }
    out.checks.push(Check::at_most(
        "Gaussian spectral vs quadrature",
        worst / scale,
        s.float("check.quad_tol"),
    ));
    out.table("quadrature.csv", &quad);
    Ok(())
}

fn single_circle_run(
    eps: f64,
    l: f64,
    m: usize,
    r0: f64,
    stop: f64,
    frames: usize,
    ctx: &Context,
) -> Result<FrontTrace> {
    let c = l / 2.0;
    let loops = LoopConfig::concentric([c, c], &[r0])?;
    let mu = ctx.profile.mu(2);
    let mut cfg = SimConfig::new(eps, l, m, loops, r0 * r0 / (2.0 * mu), &ctx.profile, &ctx.potential)?;
    cfg.output_every = cfg.t_final / frames as f64;
    cfg.stop_radius = stop;
    run_simulation(&cfg, &ctx.profile, &ctx.potential)
}

/// `(t, R_measured, R_exact, |R_m² - R_e²| / R_e²)` while both radii stay
/// at or above `stop`.
fn circle_errors(trace: &FrontTrace, r0: f64, stop: f64) -> Result<Vec<[f64; 4]>> {
    let mut rows = Vec::new();
    for (t, r) in trace.radius_series(0) {
        let Ok(e) = exact_circle_radius(r0, trace.mu, t) else { break };
        if e < stop || r < stop {
            break;
        }
        rows.push([t, r, e, (r * r - e * e).abs() / (e * e)]);
    }
    Ok(rows)
}

fn circle_law(s: &Settings, ctx: &Context, out: &mut Outcome) -> Result<()> {
    let (eps, l, m) = (s.float("sim.eps"), s.float("sim.l"), s.int("sim.m"));
    let (r0, stop, frames) = (s.float("sim.r0"), s.float("sim.stop_radius"), s.int("sim.frames"));
    let trace = single_circle_run(eps, l, m, r0, stop, frames, ctx)?;
    let rows = circle_errors(&trace, r0, stop)?;
    let mut t = Table::new(&["t", "r_measured", "r_exact", "rel_error_r2"]);
    for r in &rows {
        t.push(r.to_vec());
    }
    let worst = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
    out.checks.push(Check::holds("front tracked to the stop radius", rows.len() >= 2));
    out.checks.push(Check::at_most("circle law R² relative error", worst, s.float("check.tol")));
    out.table("radius.csv", &t);
    out.table("plot_radius.csv", &emit_plot_data(&trace, PlotKind::Radius)?);
    out.table("plot_contours.csv", &emit_plot_data(&trace, PlotKind::Contours)?);
    out.constants.insert("dt".into(), trace.frames.last().map_or(0.0, |f| f.t) / trace.steps.max(1) as f64);
    if s.flag("output.snapshots") {
        let last = final_field(eps, l, m, &[r0], trace.frames.last().map_or(0.0, |f| f.t), ctx)?;
        out.files.push(("final_field.bin".into(), last.to_snapshot()));
    }

    let trend = s.list("sim.trend_eps");
    if !trend.is_empty() {
        let mut tt = Table::new(&["eps", "m", "max_rel_error_r2", "scaled_by_log"]);
        for &e in std::iter::once(&eps).chain(trend) {
            let mm = crate::evolve::resolution_for(e, l);
            let tr = if e == eps {
                trace.clone()
            } else {
                single_circle_run(e, l, mm, r0, stop, frames, ctx)?
            };
            let w = circle_errors(&tr, r0, stop)?.iter().map(|r| r[3]).fold(0.0, f64::max);
            tt.push(vec![e, if e == eps { m as f64 } else { mm as f64 }, w, w * e.ln().abs()]);
        }
        out.table("trend.csv", &tt);
    }
    Ok(())
}

fn final_field(eps: f64, l: f64, m: usize, radii: &[f64], t: f64, ctx: &Context) -> Result<PeriodicField> {
    let c = l / 2.0;
    let loops = LoopConfig::concentric([c, c], radii)?;
    let cfg = SimConfig::new(eps, l, m, loops, t.max(1e-12), &ctx.profile, &ctx.potential)?;
    let mut sim = crate::evolve::Simulation::from_config(&cfg, &ctx.profile, &ctx.potential)?;
    sim.advance_to(t)?;
    Ok(sim.field().clone())
}

fn nested_independence(s: &Settings, ctx: &Context, out: &mut Outcome) -> Result<()> {
    let (eps, l, m) = (s.float("sim.eps"), s.float("sim.l"), s.int("sim.m"));
    let radii = s.list("sim.radii").to_vec();
    let n = radii.len();
    let inner = radii[n - 1];
    let mu = ctx.profile.mu(2);
    let f = s.float("sim.shrink");
    let t_end = (1.0 - f * f) * inner * inner / (2.0 * mu);
    let frames = s.int("sim.frames");
    let c = l / 2.0;
    let run = |rr: &[f64]| -> Result<FrontTrace> {
        let loops = LoopConfig::concentric([c, c], rr)?;
        let mut cfg = SimConfig::new(eps, l, m, loops, t_end, &ctx.profile, &ctx.potential)?;
        cfg.output_every = t_end / frames as f64;
        run_simulation(&cfg, &ctx.profile, &ctx.potential)
    };
    let nested = run(&radii)?;
    let control = run(&[inner])?;

    // plateaus: region k (k enclosing fronts) should sit at the value k
    let tol = s.float("check.plateau_factor") * eps * eps.ln().abs();
    let mut worst_plateau = 0.0f64;
    let mut measured = 0usize;
    for k in 0..=n {
        for (_, v) in nested.plateau_series(k) {
            worst_plateau = worst_plateau.max((v - k as f64).abs());
            measured += 1;
        }
    }
    out.checks.push(Check::holds("every plateau measured", (0..=n).all(|k| !nested.plateau_series(k).is_empty())));
    out.checks.push(Check::at_most("plateau deviation", worst_plateau, tol));

    let a = nested.radius_series(n - 1);
    let b = control.radius_series(0);
    let mut t = Table::new(&["t", "r_nested_inner", "r_control", "rel_deviation"]);
    let mut worst = 0.0f64;
    for (p, q) in a.iter().zip(&b) {
        let d = (p.1 - q.1).abs() / q.1;
        worst = worst.max(d);
        t.push(vec![p.0, p.1, q.1, d]);
    }
    out.checks.push(Check::holds("inner front tracked in both runs", a.len() >= 2 && b.len() >= 2));
    out.checks.push(Check::at_most(
        "inner front vs single-front control",
        worst,
        s.float("check.independence_tol"),
    ));
    out.constants.insert("plateau_samples".into(), measured as f64);
    out.table("independence.csv", &t);
    out.table("plot_radius.csv", &emit_plot_data(&nested, PlotKind::Radius)?);
    out.table("plot_plateau.csv", &emit_plot_data(&nested, PlotKind::Plateau)?);
    out.table("plot_contours.csv", &emit_plot_data(&nested, PlotKind::Contours)?);
    if s.flag("output.snapshots") {
        let last = final_field(eps, l, m, &radii, nested.frames.last().map_or(0.0, |f| f.t), ctx)?;
        out.files.push(("final_field.bin".into(), last.to_snapshot()));
    }
    Ok(())
}

fn abar_convergence(s: &Settings, ctx: &Context, out: &mut Outcome) -> Result<()> {
    let r = s.float("abar.radius");
    let d = ClampedCircle {
        center: [0.0, 0.0],
        radius: r,
        rho: s.float("abar.rho"),
    };
    let angles = s.int("abar.angles");
    let mut t = Table::new(&["eps", "abar", "limit", "error", "error_times_log"]);
    let mut errors = Vec::new();
    for &eps in s.list("abar.eps") {
        let p = AepsParams::new(eps, s.float("abar.gamma"), &ctx.profile, &d)?;
        let (mut worst, mut at, mut lim) = (0.0f64, 0.0, 0.0);
        for k in 0..angles {
            let th = 2.0 * PI * k as f64 / angles as f64;
            let x = [r * th.cos(), r * th.sin()];
            let a = a_bar_eps(p, &OverlapKernel::Exact, x)?;
            let l = abar_limit(&ctx.profile, &d, x);
            if (a - l).abs() >= worst {
                worst = (a - l).abs();
                at = a;
                lim = l;
            }
        }
        errors.push(worst);
        t.push(vec![eps, at, lim, worst, worst * eps.ln().abs()]);
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    out.checks.push(Check::holds("front error decreases monotonically", monotone));
    out.checks.push(Check::at_most(
        "front error at the smallest eps",
        *errors.last().expect("validated non-empty sweep"),
        s.float("check.tol"),
    ));
    out.table("abar.csv", &t);
    Ok(())
}

fn corrector_study(s: &Settings, ctx: &Context, out: &mut Outcome) -> Result<()> {
    let profile = &ctx.profile;
    let pot = &ctx.potential;
    let op = LinearizedOperator::new(profile, pot)?;

    let kernel = op.kernel_check();
    out.checks.push(Check::at_most("kernel residual L[φ']", kernel, s.float("check.kernel_tol")));

    let width = s.float("cor.manufactured_width");
    let g = apply_l_by_quadrature(|x| manufactured_chi(x, width), width, profile, pot);
    let xi = profile.grid().nodes().to_vec();
    let sol = solve_nodal(&op, xi.clone(), g)?;
    let mut mt = Table::new(&["xi", "psi", "exact", "error"]);
    let mut merr = 0.0f64;
    for (&x, &p) in xi.iter().zip(&sol.psi) {
        let e = manufactured_chi(x, width);
        merr = merr.max((p - e).abs());
        if x.abs() <= 2.0 * width {
            mt.push(vec![x, p, e, (p - e).abs()]);
        }
    }
    out.checks.push(Check::at_most("manufactured solution error", merr, s.float("check.manufactured_tol")));
    out.table("manufactured.csv", &mt);

    let eps = s.float("cor.eps");
    let r = s.float("cor.radius");
    let d = ClampedCircle {
        center: [0.0, 0.0],
        radius: r,
        rho: s.float("cor.rho"),
    };
    let p = AepsParams::new(eps, s.float("cor.gamma"), profile, &d)?;
    let prob = CorrectorProblem::from_geometry(
        p,
        pot,
        s.float("cor.sigma_tilde"),
        0.0,
        [r, 0.0],
        s.float("cor.xi_max"),
        s.int("cor.xi_nodes"),
    )?;
    out.constants.insert("abar".into(), prob.abar);
    out.constants.insert("sigma".into(), prob.sigma);
    out.checks.push(Check::at_most(
        "solvability |∫ g φ'|",
        prob.orthogonality().abs(),
        s.float("check.orthogonality_tol"),
    ));
    let sol = solve_corrector(&op, &prob)?;
    out.checks.push(Check::holds("corrector equation residual", sol.equation_ok()));
    out.checks.push(Check::at_most("normalization |∫ ψ φ'|", sol.constraint_residual, 1e-8));
    let fit = psi_decay_fit(&sol, eps, 5.0)?;
    let mut dt = Table::new(&["quantity", "fitted_exponent", "stated_exponent", "constant", "pass"]);
    dt.push(vec![0.0, fit.exponent, fit.stated, fit.constant, fit.pass as u8 as f64]);
    out.checks.push(Check::holds("ψ decay envelope 1/(ε|ln ε|(1+|ξ|))", fit.pass));
    let gfit = g_decay_fit(&prob, 1.0, 50.0, 25)?;
    dt.push(vec![1.0, gfit.exponent, gfit.stated, gfit.constant, gfit.pass as u8 as f64]);
    out.checks.push(Check::holds("g decay envelope", gfit.pass));
    out.table("decay_fits.csv", &dt);
    out.text("psi.csv", sol.to_csv(eps));
    Ok(())
}

/// Worst slack of a circle spec on a grid, with its plateau check at the
/// same time level.
struct BarrierRun {
    worst: f64,
    threshold: f64,
    worst_band: f64,
    worst_lattice: f64,
    samples: usize,
    speed: f64,
    csv: String,
    plateau: Option<crate::barriers::PlateauCheck>,
}

#[allow(clippy::too_many_arguments)]
fn barrier_run(
    eps: f64,
    sigma_tilde: f64,
    gamma: f64,
    radii: &[f64],
    rho: f64,
    l: f64,
    m: usize,
    s: &Settings,
    rng: &mut ChaCha8Rng,
    ctx: &Context,
    op: &LinearizedOperator,
    with_plateau: bool,
) -> Result<BarrierRun> {
    let c = l / 2.0;
    let shape = GridShape::new(l, m)?;
    let spec = BarrierSpec::circles(
        eps,
        gamma,
        sigma_tilde,
        [c, c],
        radii.to_vec(),
        rho,
        s.float("barrier.horizon"),
        &ctx.profile,
        &ctx.potential,
    )?;
    let dt = s.float("barrier.dt_factor") * eps / spec.speed;
    if 2.0 * dt > spec.horizon {
        return invalid("barrier.horizon must cover two time-difference steps");
    }
    let mut b = Barrier::new(spec.clone(), &ctx.profile, &ctx.potential);
    for t in [0.0, dt, 2.0 * dt] {
        b.prepare(op, t, BankOptions::default())?;
    }
    let mut samples = stratified_samples(&spec, dt, shape, s.int("barrier.band_stride"), s.int("barrier.lattice_stride"));
    for _ in 0..s.int("barrier.random_samples") {
        samples.nodes.push((rng.random_range(0..m), rng.random_range(0..m)));
        samples.band.push(None);
    }
    let rep = check_subsolution(&b, dt, dt, shape, &samples)?;
    let plateau = if with_plateau {
        let stride = (m / 256).max(1);
        let pts: Vec<_> = (0..m)
            .step_by(stride)
            .flat_map(|i| (0..m).step_by(stride).map(move |j| shape.point(i, j)))
            .collect();
        Some(plateau_check(&b, dt, &pts)?)
    } else {
        None
    };
    Ok(BarrierRun {
        worst: rep.worst,
        threshold: rep.threshold,
        worst_band: rep.worst_band,
        worst_lattice: rep.worst_lattice,
        samples: samples.len(),
        speed: spec.speed,
        csv: rep.to_csv(),
        plateau,
    })
}

fn barrier_check(s: &Settings, seed: u64, ctx: &Context, out: &mut Outcome) -> Result<()> {
    let eps = s.float("barrier.eps");
    let st = s.float("barrier.sigma_tilde");
    let gamma = s.float("barrier.gamma");
    let op = LinearizedOperator::new(&ctx.profile, &ctx.potential)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = Table::new(&[
        "spec",
        "fronts",
        "rho",
        "speed",
        "samples",
        "worst",
        "worst_band",
        "worst_lattice",
        "threshold",
    ]);
    let mut row = |id: f64, n: usize, rho: f64, r: &BarrierRun| {
        summary.push(vec![
            id,
            n as f64,
            rho,
            r.speed,
            r.samples as f64,
            r.worst,
            r.worst_band,
            r.worst_lattice,
            r.threshold,
        ]);
    };

    let single_radii = s.list("barrier.single.radii").to_vec();
    let rho1 = s.float("barrier.single.rho");
    let single = barrier_run(
        eps,
        st,
        gamma,
        &single_radii,
        rho1,
        s.float("barrier.single.l"),
        s.int("barrier.single.m"),
        s,
        &mut rng,
        ctx,
        &op,
        true,
    )?;
    out.checks.push(Check::at_most("single-front worst slack", single.worst, single.threshold));
    let p1 = single.plateau.expect("plateau requested");
    out.checks.push(Check::holds("single-front plateau points exist", p1.admissible > 0));
    out.checks.push(Check::at_least("single-front plateau margin", p1.min_margin, 0.0));
    row(1.0, single_radii.len(), rho1, &single);
    out.text("slack_single.csv", single.csv);

    let nested_radii = s.list("barrier.nested.radii").to_vec();
    let rho2 = s.float("barrier.nested.rho");
    let nested = barrier_run(
        eps,
        st,
        gamma,
        &nested_radii,
        rho2,
        s.float("barrier.nested.l"),
        s.int("barrier.nested.m"),
        s,
        &mut rng,
        ctx,
        &op,
        false,
    )?;
    out.checks.push(Check::at_most("nested worst slack", nested.worst, nested.threshold));
    row(2.0, nested_radii.len(), rho2, &nested);
    out.text("slack_nested.csv", nested.csv);

    // plateau bound of a nested spec whose clamp reaches the required depth;
    // only values are needed, so the corrector banks cover a small window
    let radii = s.list("barrier.plateau.radii").to_vec();
    let rho = s.float("barrier.plateau.rho");
    let spec = BarrierSpec::circles(eps, gamma, st, [0.0, 0.0], radii.clone(), rho, 0.0, &ctx.profile, &ctx.potential)?;
    let n = radii.len() as f64;
    let depth = 2.0 * n / (ctx.profile.alpha() * st * eps.ln().abs());
    let reach = (radii[radii.len() - 1] - st - depth).max(0.0) + 0.25;
    let mut b = Barrier::new(spec, &ctx.profile, &ctx.potential);
    b.prepare(
        &op,
        0.0,
        BankOptions {
            window: Some((0.0, reach + 0.25)),
            ..BankOptions::default()
        },
    )?;
    let k = 24;
    let pts: Vec<_> = (-k..=k)
        .flat_map(|i| (-k..=k).map(move |j| [reach * i as f64 / k as f64, reach * j as f64 / k as f64]))
        .filter(|p: &[f64; 2]| p[0].hypot(p[1]) <= reach)
        .collect();
    let p2 = plateau_check(&b, 0.0, &pts)?;
    out.checks.push(Check::holds("nested plateau points exist", p2.admissible > 0));
    out.checks.push(Check::at_least("nested plateau margin", p2.min_margin, 0.0));
    out.constants.insert("plateau_depth_nested".into(), depth);

    if s.flag("barrier.unit_circle") {
        let unit = barrier_run(eps, st, gamma, &[1.0], 0.4, 6.0, 1024, s, &mut rng, ctx, &op, false)?;
        out.checks
            .push(Check::at_most("unit-circle regime row worst slack", unit.worst, unit.threshold).informational());
        row(0.0, 1, 0.4, &unit);
    }
    out.constants.insert("sigma".into(), st * ctx.potential.d2w(0.0));
    out.constants.insert("speed_single".into(), single.speed);
    out.constants.insert("speed_nested".into(), nested.speed);
    out.table("barrier_summary.csv", &summary);
    Ok(())
}

fn interaction_drift(s: &Settings, ctx: &Context, out: &mut Outcome) -> Result<()> {
    let l = s.float("drift.l");
    let study = DriftStudy {
        l,
        center: [l / 2.0, l / 2.0],
        inner_radius: s.float("drift.inner_radius"),
        stop_fraction: s.float("drift.stop_fraction"),
    };
    let eps = s.list("drift.eps");
    let sep = s.list("drift.separations");
    let rows = interaction_drift_study(&study, eps, sep, &ctx.profile, &ctx.potential)?;
    let mut t = Table::new(&["eps", "separation", "deviation", "deviation_times_log"]);
    for r in &rows {
        t.push(vec![r.eps, r.separation, r.deviation, r.scaled]);
    }
    let at = |i: usize, j: usize| rows[i * sep.len() + j].deviation;
    let eps_ok = (0..sep.len()).all(|j| (1..eps.len()).all(|i| at(i, j) < at(i - 1, j)));
    let sep_ok = (0..eps.len()).all(|i| (1..sep.len()).all(|j| at(i, j) < at(i, j - 1)));
    out.checks.push(Check::holds("deviation decreases with eps", eps_ok));
    out.checks.push(Check::holds("deviation decreases with separation", sep_ok));
    let control = study.row(eps[eps.len() - 1], None, &ctx.profile, &ctx.potential)?;
    out.checks.push(Check::at_most("single-front control deviation", control.deviation, 0.0));
    let scaled = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    out.checks.push(Check::at_most("largest deviation·|ln ε|", scaled, f64::INFINITY).informational());
    out.table("drift.csv", &t);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root() -> PathBuf {
        PathBuf::from("/tmp/pnflow-test")
    }

    #[test]
    fn preset_names_round_trip() {
        for p in PRESETS {
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
            let keys: Vec<_> = p.params().iter().map(|q| q.key).collect();
            let mut dedup = keys.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), keys.len(), "{}", p.name());
            ExperimentConfig::preset(p, &[], &root()).unwrap();
        }
        assert!(Preset::from_name("circle").is_err());
    }

    #[test]
    fn overrides_are_type_checked() {
        let set = |k: &str, v: &str| vec![(k.to_string(), v.to_string())];
        let ok = ExperimentConfig::preset(Preset::CircleLaw, &set("sim.eps", "0.05"), &root()).unwrap();
        assert_eq!(ok.settings.float("sim.eps"), 0.05);
        assert_eq!(ok.output_dir, root().join("circle-law"));
        for (k, v) in [("sim.eps", "x"), ("sim.m", "1000"), ("sim.nope", "1"), ("sim.eps", "0.7")] {
            let e = ExperimentConfig::preset(Preset::CircleLaw, &set(k, v), &root()).unwrap_err();
            assert_eq!(exit_code(&e), EXIT_INVALID, "{k}={v}");
        }
        let text = "preset = abar-convergence\nabar.eps = 0.1, 0.05\noutput.dir = sweep\n";
        let cfg = ExperimentConfig::from_text(text, None, &[], &root()).unwrap();
        assert_eq!(cfg.preset, Preset::AbarConvergence);
        assert_eq!(cfg.output_dir, root().join("sweep"));
        assert!(ExperimentConfig::from_text("abar.eps = 0.1", None, &[], &root()).is_err());
        assert!(ExperimentConfig::from_text("preset = abar-convergence\nabar.eps = 0.05,0.1", None, &[], &root()).is_err());
    }

    #[test]
    fn numerical_errors_map_to_abort_status() {
        assert_eq!(exit_code(&Error::NonFinite("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::NoConvergence { iterations: 1, residual: 1.0 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::UnderResolved("x".into())), EXIT_INVALID);
    }

    #[test]
    fn empty_trace_has_no_plot_data() {
        let trace = FrontTrace {
            n: 1,
            eps: 0.1,
            mu: 1.0,
            frames: Vec::new(),
            min_value: 0.0,
            max_value: 1.0,
            steps: 0,
        };
        assert!(emit_plot_data(&trace, PlotKind::Radius).is_err());
    }

    #[test]
    fn table_csv_is_stable() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, -0.5]);
        assert_eq!(t.to_csv(), "a,b\n1.0000000000e0,-5.0000000000e-1\n");
    }
}
