//! Inner-front deviation caused by an outer front, across ε and separation.

use std::path::Path;

use pnflow::experiment::{run_experiment, ExperimentConfig, Preset};

fn main() -> pnflow::Result<()> {
    let cfg = ExperimentConfig::preset(Preset::InteractionDrift, &[], Path::new("."))?;
    let out = run_experiment(&cfg)?;
    print!("{}", out.summary());
    for (name, bytes) in &out.files {
        println!("{name}: {} bytes", bytes.len());
    }
    Ok(())
}
