use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use unified_momentum::harness::{kernel_grid_command, run_experiment, verify_suite, ExperimentConfig, Suite};
use unified_momentum::Error;

#[derive(Parser)]
#[command(name = "unified-momentum", version, about = "Unified accelerated gradient methods: runs, checks and kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write CSVs, a plot and summary.json.
    Run { config: PathBuf },
    /// Run a verification suite: hyperbolic, discrete, tensor, dynamics, kernels or all.
    Verify { suite: String },
    /// Write a differential kernel on a grid as `t,tau,H`.
    Kernel {
        #[arg(long)]
        id: String,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long = "t-end", default_value_t = 10.0)]
        t_end: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => match ExperimentConfig::load(&config).and_then(|c| run_experiment(&c)) {
            Ok(outcome) => {
                for c in outcome.summary.checks.iter().filter(|c| !c.passed) {
                    eprintln!("check failed: {} ({})", c.name, c.detail);
                }
                for r in outcome.summary.runners.iter().filter(|r| r.error.is_some()) {
                    eprintln!("runner {} diverged; partial output written", r.label);
                }
                println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
                outcome.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                match e {
                    Error::Config(_) | Error::InvalidInput(_) | Error::Json(_) => 2,
                    _ => 1,
                }
            }
        },
        Command::Verify { suite } => match suite.parse::<Suite>() {
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
            Ok(suite) => match verify_suite(suite) {
                Ok(report) => {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
                    for c in report.failures() {
                        eprintln!("FAILED {}: {}", c.name, c.detail);
                    }
                    i32::from(!report.passed)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            },
        },
        Command::Kernel { id, grid, out, mu, t_end } => match kernel_grid_command(&id, grid, &out, mu, t_end) {
            Ok(rows) => {
                println!("wrote {rows} rows to {}", out.display());
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
