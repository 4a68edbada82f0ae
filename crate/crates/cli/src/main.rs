//! `spincool` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invariant check failed:\n{0}")]
    Invariant(String),
}

impl From<spincool::Error> for CliError {
    fn from(e: spincool::Error) -> Self {
        match e {
            spincool::Error::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "spincool", version, about = "Heat-bath algorithmic cooling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one algorithm and write its trace and summary
    Run {
        #[command(flatten)]
        run: RunConfig,
        /// TOML file with run settings; flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
    },
    /// Run two configurations and compare their final states
    Compare {
        /// First run as key=value pairs, e.g. "alg=ppa,n=4,backend=exact"
        #[arg(long)]
        a: String,
        /// Second run as key=value pairs
        #[arg(long)]
        b: String,
        /// Settings shared by both runs; the pair lists override them
        #[command(flatten)]
        shared: RunConfig,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Compare runs on different spin counts over their common low spins
        #[arg(long)]
        allow_n_mismatch: bool,
        /// Also write compare.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one configuration over a grid of spin counts and biases
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        eps0s: Vec<f64>,
        #[command(flatten)]
        run: RunConfig,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write sweep.csv and sweep.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-read a JSON trace and check every record
    Validate {
        trace: PathBuf,
        /// Tolerance of the marginal and probability-sum checks
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

fn layered(file: Option<PathBuf>, flags: RunConfig) -> Result<RunConfig, CliError> {
    Ok(match file {
        Some(p) => RunConfig::from_file(&p)?.layered(flags),
        None => flags,
    })
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            run,
            config,
            out,
            format,
        } => commands::run(&layered(config, run)?, &out, format),
        Command::Compare {
            a,
            b,
            shared,
            config,
            allow_n_mismatch,
            out,
        } => {
            let shared = layered(config, shared)?;
            let a = shared.clone().layered(RunConfig::from_pairs(&a)?);
            let b = shared.layered(RunConfig::from_pairs(&b)?);
            commands::compare(&a, &b, allow_n_mismatch, out.as_deref())
        }
        Command::Sweep {
            ns,
            eps0s,
            run,
            config,
            out,
        } => commands::sweep(&layered(config, run)?, &ns, &eps0s, out.as_deref()),
        Command::Validate { trace, tol } => commands::validate(&trace, tol),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spincool: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
