//! `extremal`: minimal solutions, extremal hypersurfaces, spectral data and
//! stability for semilinear elliptic systems, driven by a JSON config.
//!
//! Exit codes: 0 ok, 1 config error, 2 diverged or check failed,
//! 3 ambiguous (iteration cap), 4 partial trace.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Exit;
use crate::config::{Overrides, Problem};

#[derive(Parser)]
#[command(name = "extremal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON problem config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Seed for every randomized probe.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative bisection tolerance on λ*.
    #[arg(long)]
    tol_lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal solution at Λ.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Λ components; one value is broadcast.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
    },
    /// λ*(σ) over the σ grid.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Also compute the extremal profile and boundedness verdict per σ.
        #[arg(long)]
        profiles: bool,
    },
    /// λ_* of the composed operator and θ_*(σ).
    Spectral {
        #[command(flatten)]
        common: Common,
    },
    /// Principal eigenvalue of the linearization at the minimal solution.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
    },
    /// Sampled checks of conditions (A)–(D).
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve { common, .. }
            | Command::Trace { common, .. }
            | Command::Spectral { common }
            | Command::Stability { common, .. }
            | Command::Verify { common } => common,
        }
    }
}

fn load(common: &Common) -> Result<Problem> {
    let mut config = config::load(&common.config)?;
    config.apply(&Overrides {
        out: common.out.clone(),
        seed: common.seed,
        tol_lambda: common.tol_lambda,
    });
    Problem::build(config)
}

fn run(cli: Cli) -> Result<Exit> {
    let common = cli.command.common();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .context("thread pool")?;
    let problem = load(common)?;
    pool.install(|| match &cli.command {
        Command::Solve { lambda, .. } => commands::solve(&problem, lambda.as_deref()),
        Command::Trace { profiles, .. } => commands::trace(&problem, *profiles),
        Command::Spectral { .. } => commands::spectral(&problem),
        Command::Stability { lambda, .. } => commands::stability(&problem, lambda.as_deref()),
        Command::Verify { .. } => commands::verify(&problem),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Exit::Config as u8)
        }
    }
}
