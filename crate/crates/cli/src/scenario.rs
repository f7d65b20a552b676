//! Scenario files: model parameters, solver settings and per-experiment
//! settings in one JSON document. Unknown fields are rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use epimfg_core::mfe::Mode;
use epimfg_core::sim::Feedback;
use epimfg_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::sha256_hex;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FullyObserved,
    Filter,
    Hjb,
    ThresholdSweep,
    Fpk,
    Mfe,
    Montecarlo,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::FullyObserved => "fully-observed",
            Experiment::Filter => "filter",
            Experiment::Hjb => "hjb",
            Experiment::ThresholdSweep => "threshold-sweep",
            Experiment::Fpk => "fpk",
            Experiment::Mfe => "mfe",
            Experiment::Montecarlo => "montecarlo",
            Experiment::Validate => "validate",
        }
    }
}

/// Overrides shared by the experiments. `None` keeps the experiment's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Grid resolution of the belief triangle.
    pub n: Option<usize>,
    /// Integration step of the time-dependent solvers (ODE, filter, FPK).
    pub dt: Option<f64>,
    /// Horizon of time-dependent runs. Stationary solves ignore it.
    pub t_end: Option<f64>,
    /// Stationarity tolerance (HJB) or fixed-point tolerance (MFE).
    pub tol: Option<f64>,
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Activity rule before symptom onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlRule {
    AlwaysActive,
    Isolate,
    /// Stationary belief-feedback policy from the HJB solver.
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullyObservedSettings {
    pub beta_bars: Vec<f64>,
    /// Initial `(S, A, I, R, D)` fractions of every class.
    pub initial: [f64; 5],
}

impl Default for FullyObservedSettings {
    fn default() -> Self {
        Self { beta_bars: vec![0.05, 0.15, 0.29, 0.35], initial: [0.99, 0.01, 0.0, 0.0, 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSettings {
    pub beta_bars: Vec<f64>,
    /// Initial belief `(S, A, R)`.
    pub initial: [f64; 3],
    pub control: ControlRule,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { beta_bars: vec![0.05, 0.15, 0.25], initial: [1.0, 0.0, 0.0], control: ControlRule::AlwaysActive }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjbSettings {
    /// Values of `beta_bar / beta_crit`.
    pub ratios: Vec<f64>,
    pub reflection: bool,
}

impl Default for HjbSettings {
    fn default() -> Self {
        Self { ratios: vec![0.1, 0.8, 1.1], reflection: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub ratios: Vec<f64>,
    /// Values of `lambda_ai` for a threshold-structure probe without
    /// recovery from `A`; skipped when empty.
    pub lambda_ai_probe: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { ratios: (1..=9).map(|k| k as f64 / 10.0).collect(), lambda_ai_probe: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpkSettings {
    /// Constant `beta` driving the population.
    pub beta: f64,
    pub control: ControlRule,
    pub bump_center: [f64; 2],
    pub bump_width: f64,
    pub record_every: f64,
    pub slice_times: Vec<f64>,
}

impl Default for FpkSettings {
    fn default() -> Self {
        Self {
            beta: 0.15,
            control: ControlRule::Optimal,
            bump_center: [0.98, 0.01],
            bump_width: 0.02,
            record_every: 1.0,
            slice_times: vec![0.0, 50.0, 100.0, 500.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfeSettings {
    pub mode: Mode,
    /// Constant starting paths.
    pub initial_betas: Vec<f64>,
    pub path_dt: Option<f64>,
}

impl Default for MfeSettings {
    fn default() -> Self {
        Self { mode: Mode::FullyObserved, initial_betas: vec![0.0, 0.5, 1.0], path_dt: None }
    }
}

/// Activity rule of simulated agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentRule {
    /// Fully observed optimum against the driving `beta`.
    FullyObserved,
    /// Belief feedback with the stationary HJB policy.
    Optimal,
    AlwaysActive,
    Isolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub agents: usize,
    /// Constant `beta` driving the agents (the first bin in closed loop).
    pub beta: f64,
    pub policy: AgentRule,
    pub feedback: Feedback,
    pub initial: [f64; 5],
    pub record_every: f64,
    /// Agents for an objective estimate from `S`; skipped when `None`.
    pub objective_agents: Option<usize>,
    pub event_log: bool,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            agents: 10_000,
            beta: 0.15,
            policy: AgentRule::FullyObserved,
            feedback: Feedback::OpenLoop,
            initial: [0.99, 0.01, 0.0, 0.0, 0.0],
            record_every: 1.0,
            objective_agents: None,
            event_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSettings {
    /// Agents of the Monte Carlo checks.
    pub agents: usize,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self { agents: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    /// Must match the subcommand when present.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub fully_observed: FullyObservedSettings,
    #[serde(default)]
    pub filter: FilterSettings,
    #[serde(default)]
    pub hjb: HjbSettings,
    #[serde(default)]
    pub threshold_sweep: SweepSettings,
    #[serde(default)]
    pub fpk: FpkSettings,
    #[serde(default)]
    pub mfe: MfeSettings,
    #[serde(default)]
    pub montecarlo: MonteCarloSettings,
    #[serde(default)]
    pub validate: ValidateSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: None,
            params: ModelParams::default(),
            seed: None,
            out: None,
            solver: SolverSettings::default(),
            fully_observed: FullyObservedSettings::default(),
            filter: FilterSettings::default(),
            hjb: HjbSettings::default(),
            threshold_sweep: SweepSettings::default(),
            fpk: FpkSettings::default(),
            mfe: MfeSettings::default(),
            montecarlo: MonteCarloSettings::default(),
            validate: ValidateSettings::default(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Scenario(msg()))
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    check(v.is_none_or(|x| x > 0.0 && x.is_finite()), || format!("{name} must be positive and finite"))
}

fn unit(name: &str, values: &[f64]) -> Result<()> {
    check(values.iter().all(|v| (0.0..=1.0).contains(v)), || format!("{name} must lie in [0, 1]"))
}

fn pmf(name: &str, values: &[f64]) -> Result<()> {
    unit(name, values)?;
    let total: f64 = values.iter().sum();
    check((total - 1.0).abs() < 1e-9, || format!("{name} must sum to 1, got {total}"))
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|source| CliError::ScenarioRead { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    /// Checks every field that a solver would otherwise reject mid-run.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::SchemaVersion { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        self.params.validate()?;
        let s = &self.solver;
        check(s.n.is_none_or(|n| n >= 4), || "solver.n must be at least 4".into())?;
        positive("solver.dt", s.dt)?;
        positive("solver.t_end", s.t_end)?;
        positive("solver.tol", s.tol)?;
        check(s.damping.is_none_or(|d| d > 0.0 && d <= 1.0), || "solver.damping must lie in (0, 1]".into())?;
        check(s.max_iter.is_none_or(|m| m >= 1), || "solver.max_iter must be at least 1".into())?;

        unit("fully_observed.beta_bars", &self.fully_observed.beta_bars)?;
        pmf("fully_observed.initial", &self.fully_observed.initial)?;
        unit("filter.beta_bars", &self.filter.beta_bars)?;
        pmf("filter.initial", &self.filter.initial)?;
        for (name, ratios) in
            [("hjb.ratios", &self.hjb.ratios), ("threshold_sweep.ratios", &self.threshold_sweep.ratios)]
        {
            check(ratios.iter().all(|r| *r >= 0.0 && r.is_finite()), || format!("{name} must be nonnegative"))?;
        }
        check(self.threshold_sweep.lambda_ai_probe.iter().all(|l| *l > 0.0 && l.is_finite()), || {
            "threshold_sweep.lambda_ai_probe must be positive".into()
        })?;
        let f = &self.fpk;
        unit("fpk.beta", &[f.beta])?;
        unit("fpk.bump_center", &f.bump_center)?;
        check(f.bump_center[0] + f.bump_center[1] <= 1.0, || "fpk.bump_center must lie in the triangle".into())?;
        positive("fpk.bump_width", Some(f.bump_width))?;
        positive("fpk.record_every", Some(f.record_every))?;
        check(f.slice_times.iter().all(|t| *t >= 0.0), || "fpk.slice_times must be nonnegative".into())?;
        unit("mfe.initial_betas", &self.mfe.initial_betas)?;
        check(!self.mfe.initial_betas.is_empty(), || "mfe.initial_betas must not be empty".into())?;
        positive("mfe.path_dt", self.mfe.path_dt)?;
        let m = &self.montecarlo;
        check(m.agents >= 1, || "montecarlo.agents must be at least 1".into())?;
        unit("montecarlo.beta", &[m.beta])?;
        pmf("montecarlo.initial", &m.initial)?;
        positive("montecarlo.record_every", Some(m.record_every))?;
        check(m.objective_agents.is_none_or(|n| n >= 1000), || {
            "montecarlo.objective_agents must be at least 1000".into()
        })?;
        check(self.validate.agents >= 1000, || "validate.agents must be at least 1000".into())?;
        Ok(())
    }

    /// Hash of the canonical serialization.
    pub fn sha256(&self) -> String {
        let text = serde_json::to_string(self).expect("scenario serializes");
        sha256_hex(text.as_bytes())
    }
}
