//! Command-line front end: list the catalog, evaluate solution fields on
//! grids, run verification suites and trace-condition checks.

mod commands;
mod config;

use clap::Parser;

use commands::{cmd_eval, cmd_list, cmd_trace_check, cmd_verify, EXIT_CONFIG};
use config::{RunArgs, RunConfig};

#[derive(Parser)]
#[command(
    name = "rank-solutions",
    about = "Construct, evaluate and verify rank-k solutions of quasilinear hyperbolic systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// List the built-in catalog with dimensions (l, p, q, k).
    List {
        /// Output format: `text` or `json`.
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Evaluate the entry's primary solution on a grid.
    Eval(RunArgs),
    /// Verify every registered solution of the entry on a grid.
    Verify(RunArgs),
    /// Check the trace conditions at seeded invariant samples.
    TraceCheck(RunArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    // clap's own usage failures must map to the config exit code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::List { format } => cmd_list(&format),
        Command::Eval(args) => with_config(&args, cmd_eval),
        Command::Verify(args) => with_config(&args, cmd_verify),
        Command::TraceCheck(args) => with_config(&args, cmd_trace_check),
    }
}

fn with_config(args: &RunArgs, f: fn(&RunConfig) -> i32) -> i32 {
    match RunConfig::from_args(args) {
        Ok(config) => f(&config),
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}
