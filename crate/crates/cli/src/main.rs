use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use insgame_cli::run::{self, Flags};

#[derive(Parser)]
#[command(name = "insgame", version, about = "Nash equilibrium solver for a two-insurer investment and reinsurance game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write every time slice instead of only t = 0.
    #[arg(long, global = true)]
    full_history: bool,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Backward solve; writes value and policy slices.
    Solve { config: PathBuf },
    /// Solve, then Monte Carlo estimates under the solved policy.
    Simulate { config: PathBuf },
    /// Local consistency check of the transition stencils.
    Consistency { config: PathBuf },
    /// Equilibrium controls along x1 (figure 1) or x2 (figure 2).
    Sweep {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        figure: u8,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags = Flags {
        workers: cli.workers,
        out: cli.out,
        full_history: cli.full_history,
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Solve { config } => run::solve(config, flags),
        Command::Simulate { config } => run::simulate(config, flags),
        Command::Consistency { config } => run::consistency(config, flags),
        Command::Sweep { config, figure } => run::sweep(config, *figure, flags),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
