//! Scenario-driven experiment runner for the epimfg solvers.
//!
//! A run reads a JSON [`Scenario`], executes one [`Experiment`], writes CSV
//! and JSON artifacts into an output directory and finishes with a
//! `manifest.json` that lists every artifact with its SHA-256 hash.

pub mod error;
pub mod experiments;
pub mod manifest;
pub mod scenario;
pub mod validate;

use std::fs;
use std::path::Path;

pub use error::{CliError, Result};
pub use manifest::{Manifest, OutputEntry, MANIFEST_FILE};
pub use scenario::{Experiment, Scenario, SCHEMA_VERSION};

use experiments::Outputs;

/// Runs `experiment` and writes its artifacts and manifest into `out`.
///
/// A `validate` run whose checks fail still writes everything, then returns
/// [`CliError::Validation`].
pub fn run_experiment(experiment: Experiment, scenario: &Scenario, out: &Path, seed: u64) -> Result<Manifest> {
    scenario.validate()?;
    if let Some(selected) = scenario.experiment {
        if selected != experiment {
            return Err(CliError::Scenario(format!(
                "scenario is for `{}` but `{}` was requested",
                selected.name(),
                experiment.name()
            )));
        }
    }
    fs::create_dir_all(out).map_err(|source| CliError::Output { path: out.to_path_buf(), source })?;
    log::info!("running {} into {}", experiment.name(), out.display());
    let mut outputs = Outputs::new(out);
    let mut failure = None;
    match experiment {
        Experiment::FullyObserved => experiments::fully_observed(scenario, &mut outputs)?,
        Experiment::Filter => experiments::filter(scenario, &mut outputs)?,
        Experiment::Hjb => experiments::hjb(scenario, &mut outputs)?,
        Experiment::ThresholdSweep => experiments::threshold_sweep(scenario, &mut outputs)?,
        Experiment::Fpk => experiments::fpk(scenario, &mut outputs)?,
        Experiment::Mfe => experiments::mfe(scenario, &mut outputs)?,
        Experiment::Montecarlo => experiments::montecarlo(scenario, seed, &mut outputs)?,
        Experiment::Validate => {
            let report = validate::validate(scenario, seed, &mut outputs)?;
            failure = validate::failures(&report);
        }
    }
    let manifest = Manifest::build(outputs.dir(), outputs.files(), experiment, seed, scenario.sha256())?;
    manifest.write(out)?;
    match failure {
        Some(err) => Err(err),
        None => Ok(manifest),
    }
}
