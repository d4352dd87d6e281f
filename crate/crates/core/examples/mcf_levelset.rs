//! Level-set mean curvature flow of a circle against R(t)² = R0² - 2μt.

use std::f64::consts::PI;

use pnflow::evolve::{exact_circle_radius, mcf_levelset_reference, zero_level};
use pnflow::geometry::{front_statistics, signed_distance, LoopConfig};
use pnflow::GridShape;

fn main() -> pnflow::Result<()> {
    let shape = GridShape::new(4.0, 128)?;
    let loops = LoopConfig::concentric(shape.center(), &[1.0])?;
    let d0 = signed_distance(&loops, 0, shape)?;
    let mu = 2.0 * PI;
    for t in [0.0, 0.02, 0.04, 0.06] {
        let d = mcf_levelset_reference(&d0, mu, t)?;
        let front = zero_level(&d).expect("front survives");
        let r = front_statistics(&front)?.mean_radius;
        println!("t = {t:.2}: R = {r:.4}  exact {:.4}", exact_circle_radius(1.0, mu, t)?);
    }
    Ok(())
}
