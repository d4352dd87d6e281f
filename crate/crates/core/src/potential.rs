//! Periodic multi-well potentials `W` with `W = 0` on the integers.
//!
//! The default is a cosine potential whose amplitude is calibrated against
//! `C_n` so that `1/2 + atan(ξ)/π` solves the standing-wave equation
//! `C_n I_1[φ] = W'(φ)` exactly. User potentials come from a two-column table
//! on `[0, 1]` and are interpolated by a periodic cubic spline.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fracops::compute_cn;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    CalibratedCosine,
    Table(PeriodicSpline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    dimension: usize,
    cn: f64,
    amplitude: f64,
}

/// Reduces `u` to `r ∈ [-1/2, 1/2]` with `u - r ∈ Z`; exact at integers.
#[inline]
fn reduce(u: f64) -> f64 {
    u - u.round()
}

impl Potential {
    /// `W(u) = A (1 - cos 2πu)` with `A = C_n / (4π)`.
    pub fn calibrated_cosine(dimension: usize) -> Result<Self> {
        let cn = compute_cn(dimension)?;
        Ok(Self {
            kind: PotentialKind::CalibratedCosine,
            dimension,
            cn,
            amplitude: cn / (4.0 * PI),
        })
    }

    pub fn from_table(dimension: usize, spline: PeriodicSpline) -> Result<Self> {
        let cn = compute_cn(dimension)?;
        let p = Self {
            kind: PotentialKind::Table(spline),
            dimension,
            cn,
            amplitude: f64::NAN,
        };
        p.validate()?;
        Ok(p)
    }

    /// Loads a two-column `u W(u)` table covering `[0, 1]`.
    pub fn load_table(dimension: usize, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_table(dimension, PeriodicSpline::parse_table(&text)?)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `C_n` for the configured dimension.
    pub fn cn(&self) -> f64 {
        self.cn
    }

    /// Cosine amplitude `A` (NaN for tables).
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn w(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::CalibratedCosine => {
                let s = (PI * reduce(u)).sin();
                2.0 * self.amplitude * s * s
            }
            PotentialKind::Table(sp) => sp.eval(u, 0),
        }
    }

    pub fn dw(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::CalibratedCosine => 2.0 * PI * self.amplitude * (2.0 * PI * reduce(u)).sin(),
            PotentialKind::Table(sp) => sp.eval(u, 1),
        }
    }

    pub fn d2w(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::CalibratedCosine => {
                4.0 * PI * PI * self.amplitude * (2.0 * PI * reduce(u)).cos()
            }
            PotentialKind::Table(sp) => sp.eval(u, 2),
        }
    }

    pub fn d3w(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::CalibratedCosine => {
                -8.0 * PI * PI * PI * self.amplitude * (2.0 * PI * reduce(u)).sin()
            }
            PotentialKind::Table(sp) => sp.eval(u, 3),
        }
    }

    /// `α = W''(0) / C_n`, the tail coefficient of the layer solution.
    pub fn alpha(&self) -> f64 {
        self.d2w(0.0) / self.cn
    }

    /// `sup |W''|`, sampled.
    pub fn max_abs_d2w(&self) -> f64 {
        match &self.kind {
            PotentialKind::CalibratedCosine => 4.0 * PI * PI * self.amplitude,
            PotentialKind::Table(_) => (0..=4096)
                .map(|k| self.d2w(k as f64 / 4096.0).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Whether `W(1/2 + s) = W(1/2 - s)`, sampled.
    pub fn is_even_about_half(&self) -> bool {
        (0..=200).all(|k| {
            let s = k as f64 / 400.0;
            (self.w(0.5 + s) - self.w(0.5 - s)).abs() <= 1e-12 * (1.0 + self.w(0.5 + s).abs())
        })
    }

    /// Checks periodicity, zeros at the integers, positivity away from them and
    /// `W''(0) > 0` on a sample set.
    pub fn validate(&self) -> Result<()> {
        let samples = 2000;
        for k in 0..=samples {
            let u = -1.0 + 3.0 * k as f64 / samples as f64;
            if (self.w(u + 1.0) - self.w(u)).abs() > 1e-12 {
                return invalid(format!("potential is not 1-periodic at u = {u}"));
            }
            let dist = (u - u.round()).abs();
            if dist >= 1e-3 && !(self.w(u) > 0.0) {
                return invalid(format!("potential must be positive off the integers (u = {u})"));
            }
        }
        for k in -2..=2 {
            let u = k as f64;
            if self.w(u).abs() > 1e-12 || self.dw(u).abs() > 1e-10 {
                return invalid(format!("W and W' must vanish at the integer {k}"));
            }
        }
        if !(self.d2w(0.0) > 0.0) {
            return invalid("W''(0) must be positive");
        }
        Ok(())
    }
}

/// C² periodic cubic spline with period 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    /// `knots` in `[0, 1)` strictly increasing starting at 0; `values` the
    /// corresponding samples (the value at 1 is the value at 0).
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 4 || values.len() != n {
            return invalid("periodic spline needs at least 4 knots with matching values");
        }
        if knots[0] != 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) || knots[n - 1] >= 1.0 {
            return invalid("spline knots must start at 0, increase strictly and stay below 1");
        }
        let h = |k: usize| {
            if k + 1 < n {
                knots[k + 1] - knots[k]
            } else {
                1.0 - knots[n - 1]
            }
        };
        let y = |k: usize| values[k % n];
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for k in 0..n {
            let hp = h((k + n - 1) % n);
            let hk = h(k);
            a[(k, (k + n - 1) % n)] += hp / 6.0;
            a[(k, k)] += (hp + hk) / 3.0;
            a[(k, (k + 1) % n)] += hk / 6.0;
            rhs[k] = (y(k + 1) - y(k)) / hk - (y(k) - y(k + n - 1)) / hp;
        }
        let second = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("periodic spline system".into()))?;
        Ok(Self {
            knots,
            values,
            second: second.iter().copied().collect(),
        })
    }

    /// Parses whitespace/comma separated `u W` rows, `#` comments allowed.
    /// Rows must cover `[0, 1]`; a row at `u = 1` is dropped after checking it
    /// matches `u = 0`.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            rows.push((parse(cols[0])?, parse(cols[1])?));
        }
        if rows.len() < 5 {
            return Err(Error::Parse("potential table needs at least 5 rows".into()));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let first = rows[0];
        let last = *rows.last().unwrap();
        if first.0 != 0.0 || (last.0 - 1.0).abs() > 1e-12 {
            return Err(Error::Parse("potential table must span u = 0 .. 1".into()));
        }
        if (first.1 - last.1).abs() > 1e-12 {
            return Err(Error::Parse("W(0) and W(1) differ: table is not periodic".into()));
        }
        rows.pop();
        let (knots, values) = rows.into_iter().unzip();
        Self::new(knots, values)
    }

    pub fn eval(&self, u: f64, order: usize) -> f64 {
        let n = self.knots.len();
        let x = u - u.floor();
        let k = self.knots.partition_point(|&t| t <= x).max(1) - 1;
        let (x0, x1) = (self.knots[k], if k + 1 < n { self.knots[k + 1] } else { 1.0 });
        let h = x1 - x0;
        let (y0, y1) = (self.values[k], self.values[(k + 1) % n]);
        let (m0, m1) = (self.second[k], self.second[(k + 1) % n]);
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            1 => (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1,
            2 => a * m0 + b * m1,
            _ => (m1 - m0) / h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine() -> Potential {
        Potential::calibrated_cosine(2).unwrap()
    }

    #[test]
    fn calibrated_cosine_values() {
        let w = cosine();
        assert_eq!(w.w(0.0), 0.0);
        assert!(w.w(1.0).abs() < 1e-15);
        assert!((w.w(0.5) - 1.0 / PI).abs() < 1e-12);
        assert!((w.amplitude() - 2.0 / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn calibrated_cosine_derivatives() {
        let w = cosine();
        assert_eq!(w.dw(0.0), 0.0);
        assert!(w.dw(0.5).abs() < 1e-15);
        assert!((w.dw(0.25) - 1.0).abs() < 1e-12);
        assert!((w.d2w(0.0) - 2.0 * PI).abs() < 1e-10);
        assert!((w.d2w(0.5) + 2.0 * PI).abs() < 1e-10);
        assert_eq!(w.d2w(1.0), w.d2w(0.0));
    }

    #[test]
    fn alpha_is_pi() {
        assert!((cosine().alpha() - PI).abs() < 1e-10);
    }

    #[test]
    fn derivative_at_integer_is_exactly_zero() {
        let w = cosine();
        for k in -5..=5 {
            assert_eq!(w.dw(k as f64), 0.0);
        }
    }

    #[test]
    fn invariants_hold_for_cosine() {
        cosine().validate().unwrap();
        assert!(cosine().is_even_about_half());
    }

    fn table_text(f: impl Fn(f64) -> f64, n: usize) -> String {
        (0..=n)
            .map(|k| {
                let u = k as f64 / n as f64;
                format!("{u} {}\n", if k == n { f(0.0) } else { f(u) })
            })
            .collect()
    }

    #[test]
    fn table_potential_reproduces_smooth_function() {
        let f = |u: f64| (PI * u).sin().powi(2) + 0.2 * (PI * u).sin().powi(4);
        let sp = PeriodicSpline::parse_table(&table_text(f, 200)).unwrap();
        let w = Potential::from_table(2, sp).unwrap();
        for k in 0..50 {
            let u = -0.3 + 0.037 * k as f64;
            assert!((w.w(u) - f(u)).abs() < 1e-7);
        }
        let d2_exact = 2.0 * PI * PI;
        assert!((w.d2w(0.0) - d2_exact).abs() < 1e-2);
    }

    #[test]
    fn table_rejects_non_periodic_data() {
        let text = "0 0\n0.25 0.5\n0.5 1\n0.75 0.5\n1 0.1\n";
        assert!(PeriodicSpline::parse_table(text).is_err());
        assert!(PeriodicSpline::parse_table("0 0\n0.5 1\n").is_err());
        assert!(PeriodicSpline::parse_table("0 0\n0.2 x\n0.4 1\n0.6 1\n1 0\n").is_err());
    }

    #[test]
    fn table_rejects_potential_vanishing_off_integers() {
        // second zero at u = 1/2
        let f = |u: f64| if (u - 0.5).abs() < 1e-12 { 0.0 } else { (2.0 * PI * u).sin().powi(2) };
        let sp = PeriodicSpline::parse_table(&table_text(f, 100)).unwrap();
        assert!(Potential::from_table(2, sp).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn finite_difference_matches_derivative(u in -3.0f64..3.0) {
                let w = cosine();
                let h = 1e-5;
                let fd = (w.w(u + h) - w.w(u - h)) / (2.0 * h);
                prop_assert!((fd - w.dw(u)).abs() <= 10.0 * h * h * w.d3w(u).abs().max(1.0) + 1e-9);
                let fd2 = (w.dw(u + h) - w.dw(u - h)) / (2.0 * h);
                prop_assert!((fd2 - w.d2w(u)).abs() <= 1e-7);
            }

            #[test]
            fn periodic_and_nonnegative(u in -10.0f64..10.0) {
                let w = cosine();
                prop_assert!((w.w(u + 1.0) - w.w(u)).abs() <= 1e-12);
                prop_assert!(w.w(u) >= 0.0);
            }
        }
    }
}
