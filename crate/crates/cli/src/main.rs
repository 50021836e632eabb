mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assertion failure: {0}")]
    Failed(String),
    #[error(transparent)]
    Core(#[from] tws_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use tws_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::InvalidMeasure(_) | E::Parse(_) | E::InvalidParameter(_) | E::InvalidExponent(_) | E::SignedMeasure,
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "tws", version, about = "Two-weight testing constants, checks and decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for reports and plot data.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Re-evaluate every witness and fail unless it reproduces its estimate.
    #[arg(long)]
    verify_witness: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Every testing constant of the configured weight pair.
    Constants(Common),
    /// Property and inequality suites.
    Check {
        #[command(flatten)]
        common: Common,
        /// Suite name; overrides `check.suite` in the config.
        suite: Option<String>,
    },
    /// Rank random weight pairs by a ratio of testing constants.
    Search(Common),
    /// CSV profiles for plotting.
    Plotdata(Common),
    /// Whitney decomposition of a superlevel set.
    Whitney(Common),
    /// Calderón–Zygmund split of a step function.
    Cz(Common),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TWS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TWS_THREADS = `{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (common, suite) = match &cli.command {
        Command::Check { common, suite } => (common, suite.clone()),
        Command::Constants(c)
        | Command::Search(c)
        | Command::Plotdata(c)
        | Command::Whitney(c)
        | Command::Cz(c) => (c, None),
    };
    let cfg = ExperimentConfig::load(&common.config, common.seed)?;
    std::fs::create_dir_all(&common.out)?;
    let ctx = commands::Context {
        cfg: &cfg,
        out: &common.out,
        verify: common.verify_witness,
    };
    match cli.command {
        Command::Constants(_) => commands::constants(&ctx),
        Command::Check { .. } => commands::check(&ctx, suite.as_deref().unwrap_or(&cfg.check.suite)),
        Command::Search(_) => commands::search(&ctx),
        Command::Plotdata(_) => commands::plotdata(&ctx),
        Command::Whitney(_) => commands::whitney(&ctx),
        Command::Cz(_) => commands::cz(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tws: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
