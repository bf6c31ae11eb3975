//! `stochsep`: run a benchmark from a configuration file and write its
//! convergence table, modes, samples and densities to a directory.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 no convergence (partial
//! artifacts are still written), 4 internal error.

mod artifacts;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use stochsep::mcoracle::oracle_seed;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] stochsep::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Solver(stochsep::Error::InvalidArgument(_)) => 2,
            CliError::Solver(stochsep::Error::NonConvergence { .. }) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stochsep", version, about = "Separated-representation solvers for stochastic PDE benchmarks")]
struct Args {
    /// Run configuration (flat `key: value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "stochsep-out")]
    out: PathBuf,
    /// Also run the Monte Carlo oracle and compare densities.
    #[arg(long)]
    oracle: bool,
    /// Number of oracle samples (overrides the config).
    #[arg(long)]
    oracle_samples: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<bool, CliError> {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Solver(stochsep::Error::Internal(e.to_string())))?;
    }
    let mut cfg = config::load(&args.config)?;
    cfg.oracle |= args.oracle;
    if let Some(k) = args.oracle_samples {
        if k < 100 {
            return Err(CliError::Config("--oracle-samples must be at least 100".into()));
        }
        cfg.oracle_samples = k;
    }
    let bench = &cfg.benchmark;
    eprintln!("running {} ({}) with M = {}, N = {}", bench.name(), bench.description(), cfg.settings.m, cfg.settings.n);
    let result = bench.run(&cfg.settings)?;
    let oracle = if cfg.oracle {
        eprintln!("running the Monte Carlo oracle with {} samples", cfg.oracle_samples);
        Some(bench.oracle(&cfg.settings, cfg.oracle_samples, oracle_seed(cfg.settings.seed))?)
    } else {
        None
    };
    let report = artifacts::write_all(&args.out, &result, oracle.as_ref())?;
    eprintln!(
        "{} retained terms, converged = {}, wall time {:.2} s",
        result.solution.len(),
        result.converged,
        result.wall_time.as_secs_f64()
    );
    if let Some(r) = report {
        eprintln!("pdf_l1_distance to the oracle: {:.4}", r.distance);
    }
    eprintln!("artifacts written to {}", args.out.display());
    Ok(result.converged)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: enrichment did not converge; partial artifacts kept");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
