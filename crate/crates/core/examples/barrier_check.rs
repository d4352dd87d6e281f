//! Barrier subsolution residual and plateau bound on shrinking circles. Slow: several minutes.

use std::path::Path;

use pnflow::experiment::{run_experiment, ExperimentConfig, Preset};

fn main() -> pnflow::Result<()> {
    let cfg = ExperimentConfig::preset(Preset::BarrierCheck, &[], Path::new("."))?;
    let out = run_experiment(&cfg)?;
    print!("{}", out.summary());
    for (name, bytes) in &out.files {
        println!("{name}: {} bytes", bytes.len());
    }
    Ok(())
}
