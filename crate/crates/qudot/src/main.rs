use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use qudot::{run, RunOptions, Subcommand, EXIT_TOLERANCE};

/// Charge-qudit register analysis and gate compilation.
#[derive(Parser)]
#[command(name = "qudot", version)]
enum Cli {
    /// Hilbert-space dimension of each architecture versus qudit size.
    DimScan(Flags),
    /// Compile and verify a gate.
    Gate(Flags),
    /// Replay a schedule from an initial state.
    Simulate(Flags),
    /// Tune pulse parameters of a benchmark.
    Optimize(Flags),
    /// Export site positions and electrodes.
    Layout(Flags),
}

#[derive(Args)]
struct Flags {
    /// Scenario JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario thread count.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let (cmd, f) = match Cli::parse() {
        Cli::DimScan(f) => (Subcommand::DimScan, f),
        Cli::Gate(f) => (Subcommand::Gate, f),
        Cli::Simulate(f) => (Subcommand::Simulate, f),
        Cli::Optimize(f) => (Subcommand::Optimize, f),
        Cli::Layout(f) => (Subcommand::Layout, f),
    };
    let opts = RunOptions {
        config: f.config,
        out: f.out,
        seed: f.seed,
        threads: f.threads,
    };
    match run(cmd, &opts) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!("wrote {}", outcome.out_dir.display());
            match outcome.tolerance_failure {
                Some(msg) => {
                    eprintln!("tolerance not met: {msg}");
                    ExitCode::from(EXIT_TOLERANCE)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("qudot {}: {e}", cmd.name());
            ExitCode::from(e.exit_code())
        }
    }
}
