//! Acceptance suite: one PASS/FAIL line per criterion, each at its stated
//! tolerance. A failed criterion is reported, not asserted, so the full
//! table is always printed.

mod support;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use pnflow::experiment::{run_experiment, Check, ExperimentConfig, Preset};
use pnflow::fracops::{compute_cn, frac_lap_1d};
use pnflow::layer::{exact_profile, solve_profile, ExactLayer, LayerProfile};
use pnflow::Potential;
use support::invariants;

struct Verdict {
    id: usize,
    title: &'static str,
    checks: Vec<Check>,
    elapsed: Duration,
    budget: Option<Duration>,
    error: Option<String>,
}

impl Verdict {
    fn pass(&self) -> bool {
        self.error.is_none()
            && self.checks.iter().all(|c| c.pass || c.informational)
            && self.budget.is_none_or(|b| self.elapsed <= b)
    }

    fn report(&self) -> String {
        let mut s = format!(
            "criterion {} {}: {} ({:.1} s{})\n",
            self.id,
            self.title,
            if self.pass() { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.budget.map_or(String::new(), |b| format!(" of {} s", b.as_secs())),
        );
        for c in &self.checks {
            s.push_str(&format!("    {}\n", c.line()));
        }
        if let Some(e) = &self.error {
            s.push_str(&format!("    aborted: {e}\n"));
        }
        s
    }
}

fn criterion(
    id: usize,
    title: &'static str,
    budget: Option<u64>,
    body: impl FnOnce() -> pnflow::Result<Vec<Check>>,
) -> Verdict {
    let start = Instant::now();
    let (checks, error) = match body() {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    Verdict {
        id,
        title,
        checks,
        elapsed: start.elapsed(),
        budget: budget.map(Duration::from_secs),
        error,
    }
}

fn preset_checks(p: Preset) -> pnflow::Result<Vec<Check>> {
    let cfg = ExperimentConfig::preset(p, &[], Path::new("."))?;
    Ok(run_experiment(&cfg)?.checks)
}

fn layer_checks() -> pnflow::Result<Vec<Check>> {
    let pot = Potential::calibrated_cosine(2)?;
    let residual = (0..=400)
        .map(|i| -100.0 + 0.5 * i as f64)
        .map(|xi| (pot.cn() * frac_lap_1d(&ExactLayer, xi) - pot.dw(exact_profile(xi))).abs())
        .fold(0.0f64, f64::max);
    let (solved, _) = solve_profile(&pot, 200.0, 2001)?;
    let gap = solved
        .grid()
        .nodes()
        .iter()
        .zip(solved.values())
        .filter(|(x, _)| x.abs() <= 100.0)
        .map(|(&x, &v)| (v - exact_profile(x)).abs())
        .fold(0.0f64, f64::max);
    let alpha = solved.fit_alpha();
    Ok(vec![
        Check::at_most("exact layer residual on |ξ| ≤ 100", residual, 1e-6),
        Check::at_most("solved profile vs closed form", gap, 1e-5),
        Check::at_most("tail coefficient relative error", (alpha - PI).abs() / PI, 0.02),
    ])
}

fn constant_checks() -> pnflow::Result<Vec<Check>> {
    let profile = LayerProfile::tabulate_exact(200.0, 2001)?;
    Ok(vec![
        Check::at_most("|C_2 - 2|", (compute_cn(2)? - 2.0).abs(), 1e-10),
        Check::at_most("|c_0 - 2π|", (profile.c0() - 2.0 * PI).abs(), 1e-4),
        Check::at_most("|μ - 2π|", (profile.mu(2) - 2.0 * PI).abs(), 1e-4),
    ])
}

fn invariant_checks() -> pnflow::Result<Vec<Check>> {
    let inv = invariants::run_all();
    let mut checks = vec![
        Check::holds("range preserved within 1e-6", inv.range_ok()),
        Check::at_most("integer-constant drift over 1e4 steps", inv.stationarity, 1e-12),
        Check::at_least("ordering margin over ten times", inv.ordering, -1e-8),
        Check::at_least("straight-front drift exponent", inv.drift_exponent, 2.0 - 0.3),
    ];
    for &(h, r) in &inv.drift {
        checks.push(Check::at_most(format!("straight-front drift rate at h = {h:.4e}"), r, h * h));
    }
    Ok(checks)
}

#[test]
fn acceptance() {
    let verdicts = [
        criterion(1, "operator validation", Some(10), || preset_checks(Preset::OperatorValidation)),
        criterion(2, "layer residual and tail", Some(60), layer_checks),
        criterion(3, "constants", Some(10), constant_checks),
        criterion(4, "ā_ε curvature limit", Some(600), || preset_checks(Preset::AbarConvergence)),
        criterion(5, "circle law", Some(1800), || preset_checks(Preset::CircleLaw)),
        criterion(6, "front independence and plateaus", None, || preset_checks(Preset::NestedIndependence)),
        criterion(7, "corrector suite", Some(300), || preset_checks(Preset::CorrectorStudy)),
        criterion(8, "barrier subsolution", None, || preset_checks(Preset::BarrierCheck)),
        criterion(9, "invariant suite", Some(900), invariant_checks),
    ];
    let mut report = String::from("\n");
    let mut summary = String::new();
    for v in &verdicts {
        report.push_str(&v.report());
        summary.push_str(&format!(
            "{} criterion {} {}\n",
            if v.pass() { "PASS" } else { "FAIL" },
            v.id,
            v.title
        ));
    }
    report.push_str(&format!("\n{summary}\n"));
    // straight to the process stdout so the table shows without --nocapture
    let mut out = std::io::stdout().lock();
    out.write_all(report.as_bytes()).unwrap();
    out.flush().unwrap();
}
