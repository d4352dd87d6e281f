//! Spectral half-Laplacian on the periodic square: cosine eigenvalues and a
//! Gaussian compared against direct singular quadrature.

use std::f64::consts::PI;

use pnflow::fracops::{frac_lap_quadrature_2d, frac_lap_spectral, ImageCorrection};
use pnflow::{GridShape, PeriodicField};

fn main() -> pnflow::Result<()> {
    let shape = GridShape::new(4.0, 256)?;
    for k in [1.0, 2.0, 5.0, 17.0] {
        let w = 2.0 * PI * k / shape.l;
        let f = PeriodicField::from_fn(shape, |p| (w * p[0]).cos());
        let g = frac_lap_spectral(&f)?;
        println!("mode {k:>4}: I2 cos / cos = {:.12}  expected {:.12}", g.at(0, 0), -2.0 * PI * w);
    }

    let c = shape.center();
    let sd = 0.15;
    let gauss = move |p: [f64; 2]| (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (2.0 * sd * sd)).exp();
    let f = PeriodicField::from_fn(shape, gauss);
    let spectral = frac_lap_spectral(&f)?;
    // the periodic value carries the images of the bump; remove them
    let images = ImageCorrection::new(&f, c, 0.0);
    let breaks = [sd / 3.0, sd, 2.0 * sd, 4.0 * sd, 6.5 * sd];
    for (i, j) in [(128, 128), (134, 128), (140, 137)] {
        let x = shape.point(i, j);
        let sp = spectral.at(i, j) - images.at(x);
        let q = frac_lap_quadrature_2d(&gauss, x, 1.9, &breaks);
        println!("x = ({:.3}, {:.3}): spectral {sp:.8}  quadrature {q:.8}", x[0], x[1]);
    }
    Ok(())
}
