//! `spinn`: train, reference, evaluate and compare runs.

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinn_core::problems::ProblemName;

/// Default output root when neither `--out` nor `SPINN_OUT` is given.
const DEFAULT_OUT: &str = "runs";

#[derive(Parser)]
#[command(name = "spinn", version, about = "Asymptotic-prior PINNs for singularly perturbed problems")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Output options shared by commands that write files.
#[derive(clap::Args, Clone, Debug)]
pub struct OutArgs {
    /// Output directory; derived from the output root when absent
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Root for derived output directories
    #[arg(long, env = "SPINN_OUT", default_value = DEFAULT_OUT)]
    pub root: PathBuf,

    /// Overwrite existing outputs
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, loss history, report and plots
    Train(commands::TrainArgs),

    /// Solve a PDE by finite differences and freeze the grid as a test set
    Reference {
        problem: ProblemName,

        /// Intervals per spatial axis
        #[arg(long, default_value_t = spinn_core::fdm::DEFAULT_N)]
        n: usize,

        /// Time steps of parabolic problems
        #[arg(long, default_value_t = spinn_core::fdm::DEFAULT_M)]
        m: usize,

        #[arg(long, default_value_t = spinn_core::problems::DEFAULT_EPSILON)]
        epsilon: f64,

        #[command(flatten)]
        out: OutArgs,
    },

    /// Re-score a finished run against its test set
    Evaluate {
        run: PathBuf,

        /// Reference grid CSV for PDE problems
        #[arg(long)]
        reference: Option<PathBuf>,

        #[command(flatten)]
        out: OutArgs,
    },

    /// Tabulate accuracy and wall time of finished runs on one problem
    Compare {
        problem: ProblemName,

        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,

        /// Row used as the ratio baseline; the first GKPINN run by default
        #[arg(long)]
        baseline: Option<usize>,

        #[command(flatten)]
        out: OutArgs,
    },

    /// List the benchmark problems
    ListProblems,
}

/// Exit code of a failed command: 2 for numeric failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use spinn_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::NonFinite { .. } | E::Diverged { .. } | E::UndefinedMetric | E::Solve(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let args: Vec<String> = std::env::args().collect();

    let result = match cli.command {
        Command::Train(t) => commands::train(&t, &args),
        Command::Reference { problem, n, m, epsilon, out } => commands::reference(problem, n, m, epsilon, &out, &args),
        Command::Evaluate { run, reference, out } => commands::evaluate(&run, reference.as_deref(), &out, &args),
        Command::Compare { problem, runs, baseline, out } => commands::compare(problem, &runs, baseline, &out, &args),
        Command::ListProblems => {
            commands::list_problems();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

