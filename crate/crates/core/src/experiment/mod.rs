//! Batch experiment driver: TOML configs, bound tables, Monte Carlo sweeps,
//! reconstruction runs and kernel diagnostics with CSV/JSON outputs.

mod bounds;
mod config;
mod kernel_check;
mod output;
mod reconstruct;
mod sweep;

use std::path::Path;

pub use bounds::{bounds_table, cmd_bounds, BoundsRow, BoundsSummary, BOUNDS_HEADER};
pub use config::{
    BoundsConfig, ExperimentConfig, FamilyConfig, GridConfig, KernelCheckConfig, Pairing,
    ReconstructConfig, SampleSource, StencilConfig, SweepConfig, TruthConfig,
};
pub use kernel_check::{cmd_kernel_check, idempotency_ladder, KernelReport, Normalization};
pub use output::{wilson, FileEntry, OutputDir, RunManifest, SeedEntry, MANIFEST_FILE};
pub use reconstruct::{cmd_reconstruct, ReconstructSummary, TRACE_HEADER};
pub use sweep::{build_family, cmd_sample_sweep, Family, SweepCell, SweepSummary, SWEEP_HEADER};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bounds,
    SampleSweep,
    Reconstruct,
    KernelCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::SampleSweep => "sample-sweep",
            Command::Reconstruct => "reconstruct",
            Command::KernelCheck => "kernel-check",
        }
    }
}

/// Reads a config file; parse and validation problems come back together.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml(&text)
}

/// Runs one subcommand into `out_dir` and writes its manifest. A diverging
/// reconstruction still gets its outputs and manifest before the error.
pub fn run(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut out = OutputDir::create(out_dir)?;
    let (seeds, pending) = match command {
        Command::Bounds => (cmd_bounds(cfg, &mut out).map(|_| Vec::new())?, None),
        Command::SampleSweep => (cmd_sample_sweep(cfg, &mut out)?.1, None),
        Command::KernelCheck => (cmd_kernel_check(cfg, &mut out)?.1, None),
        Command::Reconstruct => match cmd_reconstruct(cfg, &mut out) {
            Ok((_, seeds)) => (seeds, None),
            Err(e @ Error::IterationDiverged { .. }) => (Vec::new(), Some(e)),
            Err(e) => return Err(e),
        },
    };
    let manifest = out.finish(command.name(), cfg, seeds)?;
    match pending {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Process exit status for an outcome: 2 validation, 3 non-contraction, 1 other.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) => 2,
        Error::IterationDiverged { .. } => 3,
        _ => 1,
    }
}
