use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epimfg_cli::{run_experiment, CliError, Experiment, Scenario};

/// Runs one experiment of the epidemic mean-field game solvers.
#[derive(Debug, Parser)]
#[command(name = "epimfg", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON; defaults apply when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory; overrides the scenario's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Random seed; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form values, stationary decisions and susceptible value paths.
    FullyObserved,
    /// Belief filter trajectories.
    Filter,
    /// Stationary policy maps on the belief triangle.
    Hjb,
    /// Edge threshold and barrier against the infected-activity ratio.
    ThresholdSweep,
    /// Forward transport of a population belief density.
    Fpk,
    /// Mean-field equilibrium iteration.
    Mfe,
    /// Agent-based simulation.
    Montecarlo,
    /// Oracle cross-check suite.
    Validate,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::FullyObserved => Experiment::FullyObserved,
            Command::Filter => Experiment::Filter,
            Command::Hjb => Experiment::Hjb,
            Command::ThresholdSweep => Experiment::ThresholdSweep,
            Command::Fpk => Experiment::Fpk,
            Command::Mfe => Experiment::Mfe,
            Command::Montecarlo => Experiment::Montecarlo,
            Command::Validate => Experiment::Validate,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("EPIMFG_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Scenario(format!("EPIMFG_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Scenario(format!("cannot size the worker pool: {e}")))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let scenario = match &cli.scenario {
        Some(path) => Scenario::from_file(path)?,
        None => Scenario::default(),
    };
    let out = cli.out.clone().or_else(|| scenario.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(scenario.seed).unwrap_or(0);
    let manifest = run_experiment(cli.command.experiment(), &scenario, &out, seed)?;
    if !cli.quiet {
        println!("{}", out.join(epimfg_cli::MANIFEST_FILE).display());
        log::info!("{} outputs", manifest.outputs.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::FAILURE
        }
    }
}
