use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gmdsim::sim::cases::{run_case1, run_case2, run_case3};
use gmdsim::sim::selftest::run_selftest;
use gmdsim::sim::{emit_csv, ResultRow, SimConfig, SimError};

/// Monte-Carlo simulator for reduced-feedback opportunistic MIMO-OFDMA
/// scheduling and beamforming.
#[derive(Parser)]
#[command(name = "simcli", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, clap::Args)]
struct RunArgs {
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides the config value.
    #[arg(long)]
    seed: u64,
    /// Override the trial count from the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker thread count (default: all cores). The output is identical
    /// for any value.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Uncoded BER versus Eb/N0 for the per-subcarrier schemes.
    Case1(RunArgs),
    /// BER impact of codebook size and of the number of terminals.
    Case2(RunArgs),
    /// System throughput versus cluster count for the per-cluster schemes.
    Case3(RunArgs),
    /// Internal consistency checks; prints one PASS/FAIL line per check.
    Selftest(RunArgs),
}

fn load_config(args: &RunArgs) -> Result<SimConfig, SimError> {
    let mut cfg = SimConfig::parse_file(&args.config)?;
    cfg.seed = args.seed;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, SimError> {
    let args = match &cli.command {
        Command::Case1(a) | Command::Case2(a) | Command::Case3(a) | Command::Selftest(a) => {
            a.clone()
        }
    };
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(SimError::ConfigInvalid("workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
    }
    let cfg = load_config(&args)?;
    let (rows, ok): (Vec<ResultRow>, bool) = match cli.command {
        Command::Case1(_) => (run_case1(&cfg)?, true),
        Command::Case2(_) => (run_case2(&cfg)?, true),
        Command::Case3(_) => (run_case3(&cfg)?, true),
        Command::Selftest(_) => run_selftest(&cfg)?,
    };
    emit_csv(&rows, &args.out)?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(SimError::ConfigInvalid(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(SimError::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(3)
        }
    }
}
