//! A shrinking circle under the phase-field flow, compared with the
//! curvature law R(t)² = R0² - 2μt. Coarser than the acceptance run.

use pnflow::evolve::{exact_circle_radius, run_simulation, SimConfig};
use pnflow::geometry::LoopConfig;
use pnflow::{LayerProfile, Potential};

fn main() -> pnflow::Result<()> {
    let pot = Potential::calibrated_cosine(2)?;
    let profile = LayerProfile::tabulate_exact(200.0, 801)?;
    let (eps, l, m, r0) = (0.05, 4.0, 512, 1.0);
    let loops = LoopConfig::concentric([l / 2.0, l / 2.0], &[r0])?;
    let mu = profile.mu(2);
    let mut cfg = SimConfig::new(eps, l, m, loops, 0.6 * r0 * r0 / (2.0 * mu), &profile, &pot)?;
    cfg.output_every = cfg.t_final / 10.0;
    let trace = run_simulation(&cfg, &profile, &pot)?;
    for (t, r) in trace.radius_series(0) {
        println!("t = {t:.4}: R = {r:.4}  law {:.4}", exact_circle_radius(r0, mu, t)?);
    }
    Ok(())
}
