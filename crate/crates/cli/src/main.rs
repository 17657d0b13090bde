use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavelab_cli::config::{Scenario, ScenarioConfig};
use wavelab_cli::run_to_dir;

#[derive(Parser)]
#[command(name = "wavelab", version, about = "Gravity-capillary water-wave laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set physics.g=0.5`. Applied after the file, in order.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory [default: out/<scenario>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for randomized suites; overrides the file and `--set`.
        #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
        seed: Option<u64>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Print the scenario names.
    ListScenarios,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<20} {}", s.name(), s.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ScenarioConfig::load(&config, &[]) {
            Ok(cfg) => {
                println!("ok: {} ({}d, N={})", cfg.scenario, cfg.grid.dim, cfg.grid.n);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid config: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config, set, out, seed } => {
            let mut cfg = match ScenarioConfig::load(&config, &set) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("invalid config: {e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(cfg.scenario.name()));
            match run_to_dir(&cfg, &dir) {
                Ok((status, text)) => {
                    println!("{text}");
                    eprintln!("artifacts in {}", dir.display());
                    ExitCode::from(status.code() as u8)
                }
                Err(e) => {
                    eprintln!("cannot write artifacts to {}: {e}", dir.display());
                    ExitCode::from(4)
                }
            }
        }
    }
}
