//! Command-line front end tying the pipeline together.
//!
//! Exit codes: 0 success, 2 usage or validation errors, 3 I/O and malformed
//! input files, 4 memory-budget refusals, 1 anything else (including
//! selftest failures).

pub mod commands;
pub mod config;
pub mod io;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use config::{
    ConcentrationArgs, ConcentrationConfig, FitArgs, FitConfig, PercolateArgs, PercolateConfig,
    SweepArgs, SweepCmdConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "hperc",
    version,
    about = "Continuum percolation in the Hilbert space of N qubits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: HPERC_WORKERS, then available parallelism)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate the critical threshold of one sampled ensemble
    Percolate(PercolateArgs),
    /// Replicated critical-threshold sweep over an (N, M) grid
    Sweep(SweepArgs),
    /// Fit the per-dimension power law and the cross-dimension meta-laws
    Fit(FitArgs),
    /// Evaluate the fidelity tail bound and validate it empirically
    Concentration(ConcentrationArgs),
    /// Run the built-in oracle-equivalence and invariant checks
    Selftest,
}

/// Worker count: flag, then HPERC_WORKERS, then available parallelism.
pub fn worker_count(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(Error::InvalidArgument("--workers must be positive".into()));
        }
        return Ok(w);
    }
    match std::env::var("HPERC_WORKERS") {
        Ok(value) => {
            let w: usize = value.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "HPERC_WORKERS must be a positive integer, got {value:?}"
                ))
            })?;
            if w == 0 {
                return Err(Error::InvalidArgument(
                    "HPERC_WORKERS must be positive".into(),
                ));
            }
            Ok(w)
        }
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

/// Dispatch a parsed invocation inside its own worker pool; returns the
/// process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = (|| -> Result<()> {
        let workers = worker_count(cli.workers)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
        pool.install(|| match cli.command {
            Command::Percolate(args) => {
                commands::cmd_percolate(&PercolateConfig::resolve(args)?)
            }
            Command::Sweep(args) => {
                let (config, resume) = SweepCmdConfig::resolve(args)?;
                commands::cmd_sweep(&config, resume)
            }
            Command::Fit(args) => commands::cmd_fit(&FitConfig::resolve(args)?),
            Command::Concentration(args) => {
                commands::cmd_concentration(&ConcentrationConfig::resolve(args)?)
            }
            Command::Selftest => commands::cmd_selftest(),
        })
    })();
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::CsvParse { .. } => 3,
        Error::OverBudget { .. } => 4,
        Error::SelftestFailed { .. } => 1,
        _ => 2,
    }
}
