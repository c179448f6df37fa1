use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use kmgraph_cli::commands;
use kmgraph_cli::ExperimentConfig;

#[derive(Parser)]
#[command(name = "kmgraph", version, about = "Kuramoto oscillators on graphon-generated graphs")]
struct Cli {
    /// Experiment description (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write a gnuplot script next to each CSV.
    #[arg(long, global = true)]
    emit_plotscript: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print kernel eigenvalue extremes and critical couplings as JSON.
    Spectrum,
    /// Integrate one trajectory at a single coupling.
    Simulate,
    /// Sweep a coupling grid and estimate the threshold.
    Sweep,
    /// Check whether n admits a Paley graph.
    PaleyCheck {
        /// Order to check; defaults to `n` from the config.
        n: Option<usize>,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Spectrum => print_json(&commands::spectrum(&load(&cli)?)?),
        Command::Simulate => {
            let config = load(&cli)?;
            let dir = commands::out_dir(&config, cli.out.as_deref());
            print_json(&commands::simulate(&config, &dir, cli.emit_plotscript)?)
        }
        Command::Sweep => {
            let config = load(&cli)?;
            let dir = commands::out_dir(&config, cli.out.as_deref());
            print_json(&commands::run_sweep(&config, &dir, cli.emit_plotscript)?)
        }
        Command::PaleyCheck { n } => {
            let n = match n {
                Some(n) => *n,
                None => load(&cli)?.n,
            };
            let check = commands::paley_check(n);
            print_json(&check)?;
            if !check.valid {
                bail!("{n} is not a prime congruent to 1 mod 4");
            }
            Ok(())
        }
    }
}
