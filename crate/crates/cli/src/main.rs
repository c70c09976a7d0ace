//! `tailbid`: synthetic fleet generation, flexibility estimation, bidding,
//! validation, alpha sweeps and SVG reports.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tailbid::Error;

#[derive(Parser, Debug)]
#[command(name = "tailbid", version, about = "Chance-constrained FCR-D bidding for EV fleets")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// key=value config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Per-constraint violation level, default eps/3
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    /// Working directory for artifacts
    #[arg(long, global = true, default_value = "run")]
    pub dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Analytical,
    Scenario,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic fleet as minute records
    Synth {
        /// Minute-record CSV, default <dir>/minutes.csv
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        evs: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        /// Synthetic price CSV, default <dir>/prices.csv
        #[arg(long)]
        prices_out: Option<PathBuf>,
        #[arg(long)]
        no_prices: bool,
        /// One row per EV and minute instead of change points
        #[arg(long)]
        dense: bool,
    },
    /// Minute records to hourly minimum fleet flexibility
    Estimate {
        /// default <dir>/minutes.csv
        #[arg(long)]
        input: Option<PathBuf>,
        /// default <dir>/hourly.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit tails and solve bids over repeated in-sample draws
    Bid {
        /// default <dir>/hourly.csv
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        in_sample: Option<usize>,
    },
    /// Out-of-sample violations, run summaries, quantile CV and revenue
    Validate {
        /// default <dir>/hourly.csv
        #[arg(long)]
        hourly: Option<PathBuf>,
        /// Bids to validate, default <dir>/bids.csv
        #[arg(long)]
        bids: Option<PathBuf>,
        /// default <dir>/prices.csv when it exists
        #[arg(long)]
        prices: Option<PathBuf>,
    },
    /// Analytical bids over a grid of alpha values
    Sweep {
        /// Comma-separated alpha grid
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// SVG plots of bids, violations, the alpha sweep and one tail fit
    Report {
        /// Hour shown in the tail plot, default the hour with the largest mean bid
        #[arg(long)]
        hour: Option<u8>,
        #[arg(long, default_value = "up")]
        flexibility: String,
    },
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
