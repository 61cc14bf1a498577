use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod lock;
mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] mdenoise_core::error::Error),
    #[error("output directory {} is locked by another run ({holder}); remove {} if that run is gone", dir.display(), dir.join(lock::LOCK_NAME).display())]
    Locked { dir: PathBuf, holder: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_resource_cap() => 4,
            CliError::Core(mdenoise_core::error::Error::InvalidParameter { .. }) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mdenoise",
    version,
    about = "Manifold denoising by projection onto the convex hull"
)]
pub struct Cli {
    /// TOML experiment file; every section is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Use exact hull support values instead of the statistical oracle.
    #[arg(long, global = true)]
    pub exact_oracle: bool,
    /// Dataset directory written by `generate`.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Draw a seeded clean/noisy dataset.
    Generate,
    /// Run the full denoiser on a dataset.
    Denoise,
    /// Noisy copies of one hypocycloid point projected onto its hull.
    Hypocycloid,
    /// Oracle distances against exact hull distances.
    OracleEval,
    /// Image manifold of a rotated density, then the denoiser.
    Cryoem,
    /// Evaluate the bound calculators.
    Bounds,
}

fn init_threads(threads: usize) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {threads}: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    if threads > 1 {
        eprintln!("warning: built without the `parallel` feature; --threads {threads} ignored");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    let cfg = config::load(cli.config.as_deref())?;
    let _lock = lock::DirLock::acquire(&cli.out)?;
    match cli.command {
        Command::Generate => commands::generate(cli, &cfg),
        Command::Denoise => commands::denoise(cli, &cfg),
        Command::Hypocycloid => commands::hypocycloid(cli, &cfg),
        Command::OracleEval => commands::oracle_eval(cli, &cfg),
        Command::Cryoem => commands::cryoem(cli, &cfg),
        Command::Bounds => commands::bounds(cli, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
