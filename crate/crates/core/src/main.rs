use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gather3d::cli::{self, CliError, Exit};

/// Simulate and check gathering of asynchronous robots in 3D.
#[derive(Debug, Parser)]
#[command(name = "gather3d", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one configuration and write its JSONL trace.
    Run {
        /// JSON run configuration.
        config: PathBuf,
        /// Where to write the trace.
        #[arg(short, long, default_value = "trace.jsonl")]
        trace: PathBuf,
    },
    /// Run one configuration under a range of seeds and write a CSV summary.
    Batch {
        config: PathBuf,
        /// Seed range, `a..b` or `a..=b`.
        #[arg(short, long, default_value = "0..10")]
        seeds: String,
        #[arg(short, long, default_value = "batch.csv")]
        out: PathBuf,
    },
    /// Replay the monitors over a trace and compare with its recorded verdicts.
    Check {
        trace: PathBuf,
    },
    /// Write a random run configuration.
    Gen {
        /// Number of robots.
        #[arg(short, long)]
        n: usize,
        /// Stack the robots on this many horizontal planes (default: random heights).
        #[arg(short, long)]
        z_layers: Option<usize>,
        /// Side of the cube the positions are drawn from.
        #[arg(long, default_value_t = 10.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "config.json")]
        out: PathBuf,
    },
}

fn dispatch(cmd: Command) -> Result<Exit, CliError> {
    match cmd {
        Command::Run { config, trace } => cli::cmd_run(&config, &trace),
        Command::Batch { config, seeds, out } => {
            let seeds = cli::parse_seed_range(&seeds)?;
            cli::cmd_batch(&config, seeds, &out)
        }
        Command::Check { trace } => cli::cmd_check(&trace),
        Command::Gen {
            n,
            z_layers,
            spread,
            seed,
            out,
        } => cli::cmd_gen(n, z_layers, spread, seed, &out),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let exit = dispatch(args.command).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit()
    });
    ExitCode::from(exit.code() as u8)
}
