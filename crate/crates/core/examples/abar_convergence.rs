//! Curvature limit of the averaged kernel gap on a circle over a sweep of ε.

use std::path::Path;

use pnflow::experiment::{run_experiment, ExperimentConfig, Preset};

fn main() -> pnflow::Result<()> {
    let cfg = ExperimentConfig::preset(Preset::AbarConvergence, &[], Path::new("."))?;
    let out = run_experiment(&cfg)?;
    print!("{}", out.summary());
    for (name, bytes) in &out.files {
        println!("{name}: {} bytes", bytes.len());
    }
    Ok(())
}
