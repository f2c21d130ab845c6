//! Command-line driver: configuration, subcommands and the artifact
//! manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{cmd_backtest, cmd_liquidity, cmd_report, cmd_synth};
pub use config::{Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreatmentArg {
    On,
    Off,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate synthetic tick files.
    Synth,
    /// Build day records, beta tables and beta statistics.
    Liquidity,
    /// Forecast, optimize and backtest the portfolios.
    Backtest,
    /// Render stored results as markdown.
    Report,
}

#[derive(Debug, Parser)]
#[command(
    name = "liqjump",
    version,
    about = "Liquidity-adjusted returns and portfolio backtests from tick data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Treatment branches to compute.
    #[arg(long, global = true, value_enum)]
    pub treatment: Option<TreatmentArg>,
    /// Rolling window length in days.
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Portfolio ids, e.g. `1-12` or `1,7,10`.
    #[arg(long, global = true)]
    pub portfolios: Option<String>,
    /// Synthetic data seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            treatment: self.treatment.map(|t| {
                match t {
                    TreatmentArg::On => "on",
                    TreatmentArg::Off => "off",
                    TreatmentArg::Both => "both",
                }
                .to_string()
            }),
            window: self.window,
            portfolios: self.portfolios.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

/// Loads the configuration and runs the command on a pool bounded by
/// `--threads`.
pub fn run<I>(cli: &Cli, env: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let cfg = RunConfig::load(cli.config.as_deref(), env, &cli.overrides())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Liquidity => cmd_liquidity(&cfg),
        Command::Backtest => cmd_backtest(&cfg),
        Command::Report => cmd_report(&cfg),
    })
}
