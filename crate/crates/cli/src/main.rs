use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::Failure;

/// Co-simulation of coupled simulation units.
#[derive(Debug, Parser)]
#[command(name = "cosim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and write its trace as CSV.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        /// Also write every internal solver step to `<out>.<unit>.csv`.
        #[arg(long)]
        trace_internal: bool,
        /// Step Jacobi units in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Spectral radius of the co-simulation step map of a linear scenario.
    AnalyzeStability { scenario: PathBuf },
    /// Maximum error against the exact solution for a range of step sizes.
    Order {
        /// Scenario file of linear units, or one of `msd`, `decay`.
        target: String,
        #[arg(long, value_delimiter = ',', default_value = "euler,midpoint")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 1e-4)]
        h_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        h_max: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Simulated time span; defaults to the scenario end time.
        #[arg(long)]
        horizon: Option<f64>,
        /// Write the error table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in examples.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Debug, Subcommand)]
enum ExamplesAction {
    List,
    Run {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging() {
    let level = match std::env::var("COSIM_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            trace_internal,
            parallel,
        } => commands::simulate(&scenario, &out, trace_internal, parallel),
        Command::AnalyzeStability { scenario } => commands::analyze_stability(&scenario),
        Command::Order {
            target,
            methods,
            h_min,
            h_max,
            points,
            horizon,
            out,
        } => commands::order(
            &target,
            &methods,
            h_min,
            h_max,
            points,
            horizon,
            out.as_deref(),
        ),
        Command::Examples { action } => match action {
            ExamplesAction::List => commands::examples_list(),
            ExamplesAction::Run { name, out } => commands::examples_run(&name, out.as_deref()),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
