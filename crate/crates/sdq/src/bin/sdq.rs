//! Command-line front end. All experiment structure lives in the JSON config;
//! flags only override run-scale knobs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdq::config::ExperimentConfig;
use sdq::runner::{self, CommandOutcome, Overrides, RunnerError};
use sdq::simulator::SimulatorError;

#[derive(Parser)]
#[command(
    name = "sdq",
    about = "State-dependent queue simulation and heavy-traffic diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides the config's `outputs`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Event horizon override.
    #[arg(long, value_name = "N")]
    events: Option<u64>,
    /// Replication count override.
    #[arg(long, value_name = "K")]
    replications: Option<u32>,
    /// Run even when the drift criterion flags the system unstable.
    #[arg(long)]
    allow_unstable: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the queue and emit stationary laws plus Palm reports.
    Simulate(CommonArgs),
    /// Evaluate the closed-form limit density on a grid.
    Limit(CommonArgs),
    /// Convergence table of scaled laws against the limit density.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Use simulation instead of the birth-death oracle.
        #[arg(long)]
        simulate: bool,
    },
    /// Simulate the limiting reflected diffusion.
    Diffusion(CommonArgs),
    /// Solve the clock equations over the config's theta grid.
    Clocks(CommonArgs),
    /// Fluid-scaled trajectory against the linear drain limit.
    Fluid(CommonArgs),
    /// Emit only the Palm epoch report for a simulation run.
    PalmReport(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(c)
            | Command::Limit(c)
            | Command::Diffusion(c)
            | Command::Clocks(c)
            | Command::Fluid(c)
            | Command::PalmReport(c) => c,
            Command::Compare { common, .. } => common,
        }
    }
}

fn load(common: &CommonArgs) -> Result<ExperimentConfig, RunnerError> {
    let mut config = ExperimentConfig::from_path(&common.config)?;
    Overrides {
        seed: common.seed,
        events: common.events,
        replications: common.replications,
        out: common.out.clone(),
    }
    .apply(&mut config);
    Ok(config)
}

fn dispatch(command: &Command) -> Result<CommandOutcome, RunnerError> {
    let common = command.common();
    let config = load(common)?;
    match command {
        Command::Simulate(_) => runner::cmd_simulate(&config, common.allow_unstable),
        Command::Limit(_) => runner::cmd_limit(&config),
        Command::Compare { simulate, .. } => {
            runner::cmd_compare(&config, *simulate, common.allow_unstable)
        }
        Command::Diffusion(_) => runner::cmd_diffusion(&config),
        Command::Clocks(_) => runner::cmd_clocks(&config),
        Command::Fluid(_) => runner::cmd_fluid(&config),
        Command::PalmReport(_) => runner::cmd_palm_report(&config, common.allow_unstable),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                RunnerError::Simulation(SimulatorError::Unstable { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
