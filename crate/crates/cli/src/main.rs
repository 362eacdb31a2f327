use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prebandit_cli::{cmd_optimal_subset, cmd_simulate, cmd_table1, CliError, THREADS_ENV};

#[derive(Parser)]
#[command(name = "prebandit", version, about = "Preselection bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch experiment and write regret.csv, regret.svg and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
    },
    /// Recompute the rewards of the three example instances.
    Table1,
    /// Best subset of size l for the given scores.
    OptimalSubset {
        /// Comma-separated positive scores.
        #[arg(long, value_delimiter = ',', required = true)]
        scores: Vec<f64>,
        #[arg(long)]
        l: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            threads,
        } => cmd_simulate(&config, &out, threads),
        Command::Table1 => cmd_table1(),
        Command::OptimalSubset { scores, l } => cmd_optimal_subset(&scores, l),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
