use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use linjam::harness::{load_config, run_experiment, Experiment};

#[derive(Parser)]
#[command(
    name = "linjam",
    version,
    about = "Jammed coded-OFDM link simulation and jamming bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BLER over SNR, JNR, jamming method and rho.
    BlerSweep(RunArgs),
    /// Box-plot statistics of LLRs under jamming.
    LlrStats(RunArgs),
    /// Thompson-sampling jammer against the slot link.
    Bandit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML scenario file; missing keys take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// 100 blocks per point, 200 steps, 5 replications.
    #[arg(long)]
    quick: bool,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::BlerSweep(a) => (Experiment::BlerSweep, a),
        Command::LlrStats(a) => (Experiment::LlrStats, a),
        Command::Bandit(a) => (Experiment::Bandit, a),
    };
    let mut cfg = load_config(args.config.as_deref(), experiment)
        .with_context(|| format!("loading {} configuration", experiment.name()))?;
    if args.quick {
        cfg = cfg.quick();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.unwrap_or_else(|| cfg.output.clone());
    let files = run_experiment(&cfg, &out).context("running experiment")?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
