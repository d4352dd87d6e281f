use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pnflow::config::parse_assignment;
use pnflow::experiment::{
    exit_code, run_experiment, write_outputs, ExperimentConfig, EXIT_INVALID, OUTPUT_ROOT_ENV, PRESETS,
};

#[derive(Parser)]
#[command(name = "pnflow", version, about = "Nested dislocation loops under the fractional Allen-Cahn flow")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run an experiment and write its outputs
    Run(ConfigArgs),
    /// Resolve and type-check a configuration without running it
    ValidateConfig(ConfigArgs),
    /// List the presets, optionally with their keys and defaults
    ListPresets {
        #[arg(long)]
        keys: bool,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines
    config: Option<PathBuf>,
    /// Preset name, overriding the file's `preset` key
    #[arg(long)]
    preset: Option<String>,
    /// Override one key, e.g. `--set sim.eps=0.05`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> pnflow::Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        let overrides = self
            .overrides
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<pnflow::Result<Vec<_>>>()?;
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        ExperimentConfig::from_text(&text, self.preset.as_deref(), &overrides, &root)
    }
}

fn main() -> ExitCode {
    let status = match Cli::parse().verb {
        Verb::ListPresets { keys } => {
            for p in PRESETS {
                println!("{:<22} {}", p.name(), p.description());
                if keys {
                    for q in p.params() {
                        println!("    {:<28} = {:<24} {}", q.key, q.default, q.doc);
                    }
                }
            }
            0
        }
        Verb::ValidateConfig(args) => match args.load() {
            Ok(cfg) => {
                println!("preset = {}", cfg.preset.name());
                for (k, v) in cfg.settings.iter() {
                    println!("{k} = {v}");
                }
                println!("# output directory: {}", cfg.output_dir.display());
                0
            }
            Err(e) => {
                eprintln!("invalid configuration: {e}");
                EXIT_INVALID
            }
        },
        Verb::Run(args) => match args.load() {
            Err(e) => {
                eprintln!("invalid configuration: {e}");
                EXIT_INVALID
            }
            Ok(cfg) => match run_experiment(&cfg).and_then(|out| write_outputs(&cfg, &out).map(|_| out)) {
                Ok(out) => {
                    print!("{}", out.summary());
                    println!("outputs in {}", cfg.output_dir.display());
                    out.exit_status()
                }
                Err(e) => {
                    eprintln!("{} aborted: {e}", cfg.preset.name());
                    exit_code(&e)
                }
            },
        },
    };
    ExitCode::from(status as u8)
}
