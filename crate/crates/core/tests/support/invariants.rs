//! Structural checks of the time stepper shared by the invariant and
//! acceptance suites.

use std::f64::consts::PI;

use pnflow::aeps::check_rate;
use pnflow::evolve::{dt_max, Stepper};
use pnflow::geometry::{build_initial_condition, LoopConfig};
use pnflow::{GridShape, LayerProfile, PeriodicField, Potential};

pub struct Invariants {
    pub range: (f64, f64),
    pub range_bound: f64,
    pub stationarity: f64,
    pub ordering: f64,
    /// `(h, drift rate)` per resolution
    pub drift: Vec<(f64, f64)>,
    pub drift_exponent: f64,
}

fn setup() -> (LayerProfile, Potential) {
    (
        LayerProfile::tabulate_exact(200.0, 801).unwrap(),
        Potential::calibrated_cosine(2).unwrap(),
    )
}

/// Smallest and largest value over every step of a nested pair.
pub fn range_extremes(steps: usize) -> (f64, f64) {
    let (profile, pot) = setup();
    let eps = 0.1;
    let shape = GridShape::new(4.0, 256).unwrap();
    let loops = LoopConfig::concentric([2.0, 2.0], &[0.9, 0.5]).unwrap();
    let mut u = build_initial_condition(&loops, shape, eps, &profile).unwrap();
    let mut st = Stepper::new(shape, pot.clone(), eps, dt_max(eps, &pot)).unwrap();
    let (mut lo, mut hi) = (u.min(), u.max());
    for _ in 0..steps {
        u = st.step(&u).unwrap();
        lo = lo.min(u.min());
        hi = hi.max(u.max());
    }
    (lo, hi)
}

/// Largest departure of integer constants from themselves.
pub fn integer_drift(steps: usize) -> f64 {
    let (_, pot) = setup();
    let shape = GridShape::new(4.0, 32).unwrap();
    let mut worst = 0.0f64;
    for k in [0.0, 1.0, 2.0, 3.0] {
        let mut st = Stepper::new(shape, pot.clone(), 0.1, dt_max(0.1, &pot)).unwrap();
        let mut u = PeriodicField::constant(shape, k);
        for _ in 0..steps {
            u = st.step(&u).unwrap();
        }
        worst = worst.max(u.values().iter().fold(0.0f64, |a, v| a.max((v - k).abs())));
    }
    worst
}

/// `min(u_b - u_a)` over ten sampled times for ordered initial data.
pub fn ordering_margin() -> f64 {
    let (profile, pot) = setup();
    let eps = 0.1;
    let shape = GridShape::new(4.0, 256).unwrap();
    let small = LoopConfig::concentric([2.0, 2.0], &[0.8]).unwrap();
    let large = LoopConfig::concentric([2.0, 2.0], &[0.9]).unwrap();
    let mut a = build_initial_condition(&small, shape, eps, &profile).unwrap();
    let mut b = build_initial_condition(&large, shape, eps, &profile).unwrap();
    let gap = |a: &PeriodicField, b: &PeriodicField| {
        a.values().iter().zip(b.values()).map(|(x, y)| y - x).fold(f64::INFINITY, f64::min)
    };
    assert!(gap(&a, &b) >= 0.0);
    let mut st = Stepper::new(shape, pot.clone(), eps, dt_max(eps, &pot)).unwrap();
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        for _ in 0..10 {
            a = st.step(&a).unwrap();
            b = st.step(&b).unwrap();
        }
        worst = worst.min(gap(&a, &b));
    }
    worst
}

/// Periodic sum of layers `Σ_n φ((x - x₀ - nL)/ε)` in closed form, which
/// satisfies `u(x + L) = u(x) + 1`.
pub fn staircase(x: f64, x0: f64, l: f64, eps: f64) -> f64 {
    let s = x - x0;
    let n = (s / l).round();
    let s = s - n * l;
    n + 0.5 + ((PI * s / l).tan() / (PI * eps / l).tanh()).atan() / PI
}

fn half_crossing(u: &PeriodicField) -> f64 {
    let h = u.h();
    (0..u.shape().m - 1)
        .find_map(|i| {
            let (a, b) = (u.at(i, 0), u.at(i + 1, 0));
            (a <= 0.5 && b > 0.5).then(|| (i as f64 + (0.5 - a) / (b - a)) * h)
        })
        .expect("the staircase crosses one half")
}

/// Largest front displacement per unit time of a straight front placed
/// between grid nodes.
pub fn straight_front_drift(m: usize) -> (f64, f64) {
    let (_, pot) = setup();
    let (eps, l, t_end) = (0.1, 2.0, 0.05);
    let shape = GridShape::new(l, m).unwrap();
    let x0 = l / 2.0 + 0.37 * shape.h();
    let mut u = PeriodicField::from_fn(shape, |p| staircase(p[0], x0, l, eps));
    let steps = (t_end / dt_max(eps, &pot)).ceil() as usize;
    let mut st = Stepper::new(shape, pot, eps, t_end / steps as f64).unwrap().with_staircase();
    let f0 = half_crossing(&u);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        u = st.step(&u).unwrap();
        worst = worst.max((half_crossing(&u) - f0).abs());
    }
    (shape.h(), worst / t_end)
}

pub fn run_all() -> Invariants {
    let range = range_extremes(200);
    let drift: Vec<(f64, f64)> = [128, 256, 512].into_iter().map(straight_front_drift).collect();
    let (h, r): (Vec<f64>, Vec<f64>) = drift.iter().copied().unzip();
    let fit = check_rate(&h, &r, 2.0).unwrap();
    Invariants {
        range,
        range_bound: 1e-6,
        stationarity: integer_drift(10_000),
        ordering: ordering_margin(),
        drift,
        drift_exponent: fit.exponent,
    }
}

impl Invariants {
    pub fn range_ok(&self) -> bool {
        self.range.0 >= -self.range_bound && self.range.1 <= 2.0 + self.range_bound
    }

    pub fn stationarity_ok(&self) -> bool {
        self.stationarity <= 1e-12
    }

    pub fn ordering_ok(&self) -> bool {
        self.ordering >= -1e-8
    }

    pub fn drift_ok(&self) -> bool {
        self.drift.iter().all(|&(h, r)| r <= h * h) && self.drift_exponent >= 2.0 - 0.3
    }

    pub fn all_ok(&self) -> bool {
        self.range_ok() && self.stationarity_ok() && self.ordering_ok() && self.drift_ok()
    }
}
