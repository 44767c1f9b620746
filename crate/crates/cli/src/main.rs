//! `fesh`: config-driven flow experiments.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails (or
//! a regime flag is raised under `--strict-regime`), 2 on a configuration
//! error, 3 when a computation aborts.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};

use crate::config::{Experiment, RunConfig};
use crate::report::{failed, Outcome, Sinks, Status};

#[derive(Parser, Debug)]
#[command(
    name = "fesh",
    version,
    about = "Feshbach-flow ground energies of a Bose gas on a torus"
)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
    /// TOML or JSON run configuration (defaults to the reference three-mode model)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory for `<experiment>.json` and `<experiment>.csv`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// switch the exact-diagonalization comparison on or off
    #[arg(long, global = true, value_enum)]
    oracle: Option<Toggle>,
    /// seed of the iterative eigensolver
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads for sweeps and assembly
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// fail the run when a pair is outside the analytic regime
    #[arg(long, global = true)]
    strict_regime: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.oracle {
        cfg.oracle = matches!(t, Toggle::On);
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    cfg.strict_regime |= cli.strict_regime;
    cfg.validate(cli.experiment)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(Outcome, bool), Failure> {
    let cfg = load(cli).map_err(Failure::Config)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the worker pool")
            .map_err(Failure::Config)?;
    }
    let start = Instant::now();
    let outcome = match cli.experiment {
        Experiment::ThreeMode | Experiment::MultiMode | Experiment::Full => {
            experiments::run_flow(&cfg, cli.experiment)
        }
        Experiment::ScalarSweep => experiments::run_scalar_sweep(&cfg),
        Experiment::Verify => verify::run_verify(&cfg),
        Experiment::Dump => experiments::run_dump(&cfg),
    }
    .map_err(Failure::Run)?;
    let elapsed = start.elapsed().as_secs_f64();
    let sinks = Sinks::new(
        cli.out.as_deref(),
        cfg.output.json.clone(),
        cfg.output.csv.clone(),
        cli.experiment.name(),
    );
    sinks.write(&outcome, elapsed).map_err(Failure::Run)?;
    Ok((outcome, cfg.strict_regime))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok((outcome, strict)) => {
            for c in &outcome.checks {
                if c.status != Status::Pass {
                    log::warn!("{} {:?}: {}", c.name, c.status, c.detail);
                }
            }
            let pass = outcome
                .checks
                .iter()
                .filter(|c| c.status == Status::Pass)
                .count();
            eprintln!(
                "[{}] {pass}/{} checks passed",
                cli.experiment.name(),
                outcome.checks.len()
            );
            if failed(&outcome.checks, strict) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("run failed: {e:#}");
            ExitCode::from(3)
        }
    }
}
