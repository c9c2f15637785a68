//! `lcm-arena`: run robot experiments, verify traces and print the
//! separation landscape.

mod experiment;
mod landscape;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "lcm-arena",
    version,
    about = "Look-Compute-Move robot experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and evaluate a monitor on the trace.
    Run(RunArgs),
    /// Check a recorded trace against a scheduler class.
    Verify(VerifyArgs),
    /// Run the bundled separation experiments and print a pass/fail table.
    Landscape(LandscapeArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Scenario JSON file, or one of: pair, tf-quarter, tf-below-quarter, ring:N.
    #[arg(long, default_value = "pair")]
    pub scenario: String,
    /// Algorithm name; `sim:NAME` wraps an FCOM algorithm in the SIM protocol.
    #[arg(long)]
    pub algo: String,
    /// Expected robot model; must match the algorithm.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "ASYNCH")]
    pub scheduler: String,
    #[arg(long, default_value = "uniform-random-fair")]
    pub adversary: String,
    #[arg(long, env = "LCM_ARENA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of relevant times to simulate.
    #[arg(long, default_value_t = 200)]
    pub horizon: u64,
    /// One of mlcv, rdv, gcncl, tf, none.
    #[arg(long, default_value = "none")]
    pub monitor: String,
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Print the verdict as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct VerifyArgs {
    pub trace: PathBuf,
    /// Class to validate against; defaults to the class in the trace header.
    #[arg(long)]
    pub scheduler: Option<String>,
    /// Also check the SIM protocol's embedded execution and mega-cycles.
    #[arg(long)]
    pub sim: bool,
    /// Fairness window in Looks; defaults to 4n.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Args)]
pub struct LandscapeArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Run the SIM cells without the one-time color delay.
    #[arg(long, hide = true)]
    pub no_color_delay: bool,
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => experiment::cmd_run(&a),
        Command::Verify(a) => verify::cmd_verify(&a),
        Command::Landscape(a) => landscape::cmd_landscape(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
