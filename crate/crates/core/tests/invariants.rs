//! Structural properties of the time stepper: range preservation,
//! stationarity of integer states, ordering of solutions and the
//! quasi-stationarity of a straight front.

mod support;

use pnflow::aeps::check_rate;
use support::invariants::{integer_drift, ordering_margin, range_extremes, straight_front_drift};

#[test]
fn range_is_preserved() {
    let (lo, hi) = range_extremes(200);
    assert!(lo >= -1e-6 && hi <= 2.0 + 1e-6, "[{lo}, {hi}]");
}

#[test]
fn integer_states_are_stationary() {
    let d = integer_drift(10_000);
    assert!(d <= 1e-12, "{d}");
}

#[test]
fn ordered_data_stay_ordered() {
    let g = ordering_margin();
    assert!(g >= -1e-8, "{g}");
}

#[test]
fn straight_front_drift_scales_with_h_squared() {
    let drift: Vec<(f64, f64)> = [128, 256, 512].into_iter().map(straight_front_drift).collect();
    for &(h, r) in &drift {
        assert!(r <= h * h, "drift {r} at h = {h}");
    }
    let (h, r): (Vec<f64>, Vec<f64>) = drift.into_iter().unzip();
    let fit = check_rate(&h, &r, 2.0).unwrap();
    assert!(fit.pass, "{fit:?}");
}
