use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpq_sampling::experiment::{exit_code, load_config, run, Command};
use lpq_sampling::Error;

#[derive(Parser)]
#[command(
    name = "lpq-sampling",
    version,
    about = "Random sampling and reconstruction experiments in mixed-norm kernel spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config. Defaults to `out/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Trials per sweep point; overrides the config.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Closed-form bound table across the sweep grid.
    Bounds,
    /// Monte Carlo check of the sampling inequality.
    SampleSweep,
    /// Iterative reconstruction from samples.
    Reconstruct,
    /// Kernel diagnostics: idempotency, decay fit, regularity modulus.
    KernelCheck,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Bounds => Command::Bounds,
        Sub::SampleSweep => Command::SampleSweep,
        Sub::Reconstruct => Command::Reconstruct,
        Sub::KernelCheck => Command::KernelCheck,
    };
    match execute(&cli, command) {
        Ok(dir) => {
            println!("{} finished; outputs in {}", command.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn execute(cli: &Cli, command: Command) -> Result<PathBuf, Error> {
    let Some(path) = &cli.config else {
        return Err(Error::Validation(vec!["--config: required".into()]));
    };
    if cli.threads == Some(0) {
        return Err(Error::Validation(
            vec!["--threads: must be positive".into()],
        ));
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let mut cfg = load_config(path)?;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(command.name()));
    let manifest = run(command, &cfg, &dir)?;
    log::info!("config hash {}", manifest.config_hash);
    Ok(dir)
}
