//! Three nested circles: plateau values between fronts and the inner front
//! against a single-front control.

use pnflow::evolve::{run_simulation, SimConfig};
use pnflow::geometry::LoopConfig;
use pnflow::{LayerProfile, Potential};

fn main() -> pnflow::Result<()> {
    let pot = Potential::calibrated_cosine(2)?;
    let profile = LayerProfile::tabulate_exact(200.0, 801)?;
    let (eps, l, m) = (0.05, 4.0, 512);
    let c = [l / 2.0, l / 2.0];
    let run = |radii: &[f64]| -> pnflow::Result<_> {
        let loops = LoopConfig::concentric(c, radii)?;
        let mut cfg = SimConfig::new(eps, l, m, loops, 0.003, &profile, &pot)?;
        cfg.output_every = cfg.t_final / 6.0;
        run_simulation(&cfg, &profile, &pot)
    };
    let nested = run(&[0.95, 0.65, 0.35])?;
    let control = run(&[0.35])?;
    for k in 0..=3 {
        let last = nested.plateau_series(k).last().map_or(f64::NAN, |p| p.1);
        println!("plateau {k}: {last:.4}");
    }
    let control = control.radius_series(0);
    for (t, a) in nested.radius_series(2) {
        if let Some((_, b)) = control.iter().find(|(tc, _)| (tc - t).abs() < 1e-12) {
            println!("t = {t:.4}: inner {a:.4}  control {b:.4}");
        }
    }
    Ok(())
}
