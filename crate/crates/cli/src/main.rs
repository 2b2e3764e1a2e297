use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use depolcap::qstate::InputLabel;

mod commands;
mod config;
mod reproduce;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit 2).
    Usage(String),
    /// Unreadable, malformed or unusable data (exit 3).
    Data(String),
    /// A reproduction target was missed (exit 4).
    Assertion(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl From<depolcap::Error> for CliError {
    fn from(e: depolcap::Error) -> Self {
        match e {
            depolcap::Error::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "depolcap", version, about = "Polarization capacity of photon pairs under collective depolarization")]
struct Cli {
    /// TOML configuration file; keys may be overridden with DEPOLCAP_<KEY>.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed; drawn from entropy and printed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Send a two-photon state through the collective channel.
    Twirl {
        /// Named input state.
        #[arg(long, value_parser = parse_label, conflicts_with = "state_file", required_unless_present = "state_file")]
        state: Option<InputLabel>,
        /// JSON density matrix (4x4 or flat 16 of [re, im] pairs).
        #[arg(long)]
        state_file: Option<PathBuf>,
        /// Monte Carlo average instead of the exact twirl.
        #[arg(long)]
        mc: bool,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        samples: Option<u64>,
        /// Write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a delay scan and write it as CSV.
    Scan {
        #[arg(long, value_parser = parse_label)]
        label: InputLabel,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a scan CSV with a shared-width Gaussian pair.
    Fit {
        scan: PathBuf,
        /// Also fit with independent widths to check the shared-width model.
        #[arg(long)]
        unshared: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity of a channel matrix CSV or of two fitted scans.
    Capacity {
        #[arg(long, conflicts_with = "fits", required_unless_present = "fits")]
        channel: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["FIT0", "FIT1"])]
        fits: Option<Vec<PathBuf>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline for both ensembles and check the capacities.
    Reproduce {
        case: Case,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Case {
    Ideal,
    Experimental,
}

fn parse_label(s: &str) -> Result<InputLabel, String> {
    s.parse().map_err(|e: depolcap::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::RunConfig::load(cli.config.as_deref())?;
    let randomized = match &cli.command {
        Command::Twirl { mc, .. } => *mc || cfg.regime == depolcap::channel::Regime::MonteCarlo,
        Command::Scan { .. } | Command::Reproduce { .. } => true,
        Command::Fit { .. } | Command::Capacity { .. } => false,
    };
    if randomized {
        let seed = cli.seed.or(cfg.seed).unwrap_or_else(|| {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        });
        cfg.seed = Some(seed);
    }
    match cli.command {
        Command::Twirl { state, state_file, mc, samples, out } => {
            commands::twirl(&cfg, state, state_file.as_deref(), mc, samples, out.as_deref())
        }
        Command::Scan { label, trials, out } => commands::scan(&cfg, label, trials, &out),
        Command::Fit { scan, unshared, out } => commands::fit(&scan, unshared, out.as_deref()),
        Command::Capacity { channel, fits, out } => {
            commands::capacity(channel.as_deref(), fits.as_deref(), out.as_deref())
        }
        Command::Reproduce { case, out_dir } => {
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            reproduce::reproduce(&cfg, case, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("depolcap: {e}");
            ExitCode::from(e.code())
        }
    }
}
