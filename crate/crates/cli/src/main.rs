use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphpack::{load_scenario, CliError, Globals};
use graphpack_core::exact::Theorem;

/// Randomized graph-partitioning schedulers: simulation and exact analysis.
#[derive(Debug, Parser)]
#[command(name = "graphpack", version)]
struct Cli {
    /// Run a single seed instead of the scenario's list
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for summary.csv, aggregate.csv and JSON reports (stdout otherwise)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write JSONL event traces here
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Configuration-space enumeration limit
    #[arg(long, global = true)]
    max_states: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the scenario's base parameters for every seed
    Simulate { scenario: PathBuf },
    /// Simulate every sweep point for every seed and aggregate
    Sweep { scenario: PathBuf },
    /// Stationary laws over the enumerated configuration space
    Exact { scenario: PathBuf },
    /// Static partitioning optimum and capacity margin
    StaticOpt { scenario: PathBuf },
    /// Queue and cost bounds at every sweep point
    Bounds {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Bound::Dgp)]
        theorem: Bound,
        /// constant of the h precondition
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        b1: f64,
        #[arg(long, default_value_t = 1.0)]
        b2: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Bound {
    Dgp,
    FrameBased,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let globals = Globals { seed: cli.seed, out: cli.out, trace: cli.trace, max_states: cli.max_states };
    let path = match &cli.command {
        Command::Simulate { scenario }
        | Command::Sweep { scenario }
        | Command::Exact { scenario }
        | Command::StaticOpt { scenario }
        | Command::Bounds { scenario, .. } => scenario.clone(),
    };
    let mut scenario = load_scenario(&path)?;
    globals.apply(&mut scenario);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate { .. } => graphpack::simulate(&scenario, false, &mut out).map(drop),
        Command::Sweep { .. } => graphpack::simulate(&scenario, true, &mut out).map(drop),
        Command::Exact { .. } => graphpack::exact(&scenario, &globals, &mut out).map(drop),
        Command::StaticOpt { .. } => graphpack::static_opt(&scenario, &globals, &mut out).map(drop),
        Command::Bounds { theorem, c0, b1, b2, .. } => {
            let theorem = match theorem {
                Bound::Dgp => Theorem::Dgp { c0 },
                Bound::FrameBased => Theorem::FrameBased { b1, b2 },
            };
            graphpack::bounds(&scenario, theorem, &globals, &mut out).map(drop)
        }
    }?;
    out.flush().map_err(|e| CliError::io("<stdout>", e))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
