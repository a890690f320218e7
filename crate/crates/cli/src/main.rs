use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod run;

#[derive(Debug, Parser)]
#[command(name = "fshedge", version, about = "Föllmer–Schweizer hedging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `validation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the engines.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// h₀ by the configured route.
    Price,
    /// y and z on the surface grid.
    HedgeSurface,
    /// Monte Carlo hedge run and residual statistics.
    Simulate,
    /// Finite-difference solution of the pricing PDE.
    Pde,
    /// Fourier, PDE and Monte Carlo values at sample points.
    Compare,
    /// Run every configured check and write all reports.
    Check,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Assumption(String),
    Failed(String),
    Runtime(String),
}

impl CliError {
    pub fn from_core(e: fshedge::Error) -> Self {
        match e {
            fshedge::Error::Domain(_) => CliError::Config(e.to_string()),
            fshedge::Error::DegenerateVolatility { .. } => CliError::Assumption(e.to_string()),
            _ if e.assumption_item().is_some() => CliError::Assumption(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Failed(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Assumption(m) => write!(f, "{m}"),
            CliError::Failed(m) => write!(f, "checks failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
        let mut cfg = config::ExperimentConfig::load(path)?;
        if let Some(seed) = cli.seed {
            cfg.validation.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.output_dir = out.clone();
        }
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        run::run(cli.command, &cfg)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
