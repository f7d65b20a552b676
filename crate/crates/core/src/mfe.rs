//! Mean-field equilibrium: the best response to a `beta` path, the population
//! response to a policy, and the damped fixed-point iteration between them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpk::{propagate, BeliefDensity, FpkSolver};
use crate::fully_observed::{propagate_population, solve_susceptible_hjb, FullyObservedPolicy};
use crate::grid::TriGrid;
use crate::hjb::{solve_hjb, HjbConfig, PolicySchedule, Terminal};
use crate::model::ModelParams;
use crate::path::MeanFieldPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FullyObserved,
    PartiallyObserved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfeConfig {
    pub mode: Mode,
    /// Weight of the new iterate in the damped update.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub t_end: f64,
    /// Sample spacing of the `beta` path.
    pub path_dt: f64,
    /// Step of the fully observed ODEs.
    pub ode_dt: f64,
    /// Initial infected (asymptomatic) fraction of a fully observed population.
    pub initial_infected: f64,
    pub hjb: HjbConfig,
}

impl MfeConfig {
    pub fn fully_observed_default() -> Self {
        Self {
            mode: Mode::FullyObserved,
            damping: 0.5,
            tol: 1e-6,
            max_iter: 50,
            t_end: 2000.0,
            path_dt: 1.0,
            ode_dt: 0.05,
            initial_infected: 0.01,
            hjb: HjbConfig::default(),
        }
    }

    pub fn partially_observed_default() -> Self {
        Self {
            mode: Mode::PartiallyObserved,
            tol: 1e-4,
            max_iter: 200,
            hjb: HjbConfig::with_n(64),
            ..Self::fully_observed_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping", format!("must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if !(self.path_dt > 0.0) || !(self.t_end >= self.path_dt) || !(self.ode_dt > 0.0) {
            return Err(Error::invalid("t_end/path_dt/ode_dt", "need 0 < path_dt <= t_end and ode_dt > 0"));
        }
        if !(0.0..=1.0).contains(&self.initial_infected) {
            return Err(Error::invalid("initial_infected", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Best response of every attribute class.
#[derive(Debug, Clone)]
pub enum BestResponse {
    Fully(Vec<FullyObservedPolicy>),
    Partial(Vec<PolicySchedule>),
}

/// Optimal policy per attribute class against `beta`.
pub fn best_response(beta: &MeanFieldPath, params: &ModelParams, config: &MfeConfig) -> Result<BestResponse> {
    let classes = params.resolved_attributes();
    match config.mode {
        Mode::FullyObserved => {
            let policies = classes
                .par_iter()
                .map(|c| {
                    let path = solve_susceptible_hjb(beta, beta.t_end(), config.ode_dt, None, &c.params)
                        .map_err(|e| e.for_attribute(&c.id))?;
                    FullyObservedPolicy::from_value_path(&path, &c.params).map_err(|e| e.for_attribute(&c.id))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BestResponse::Fully(policies))
        }
        Mode::PartiallyObserved => {
            let schedules = classes
                .par_iter()
                .map(|c| {
                    solve_hjb(beta, &config.hjb, Terminal::StationaryTail, false, &c.params)
                        .map(|sol| sol.schedule)
                        .map_err(|e| e.for_attribute(&c.id))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BestResponse::Partial(schedules))
        }
    }
}

/// `beta` produced by a population following `response` while exposed to
/// `beta_in`, mixed over attribute classes.
pub fn population_response(
    response: &BestResponse,
    beta_in: &MeanFieldPath,
    params: &ModelParams,
    config: &MfeConfig,
) -> Result<MeanFieldPath> {
    let classes = params.resolved_attributes();
    match response {
        BestResponse::Fully(policies) => {
            let eps = config.initial_infected;
            let rho0 = vec![[1.0 - eps, eps, 0.0, 0.0, 0.0]; classes.len()];
            let state = propagate_population(policies, &rho0, config.ode_dt, beta_in.t_end(), params)?;
            // Resample onto the path grid.
            let stride = (beta_in.dt() / state.dt).round().max(1.0) as usize;
            let values: Vec<f64> = (0..beta_in.len())
                .map(|k| state.beta[(k * stride).min(state.beta.len() - 1)].clamp(0.0, 1.0))
                .collect();
            MeanFieldPath::new(beta_in.dt(), values)
        }
        BestResponse::Partial(schedules) => {
            if schedules.len() != classes.len() {
                return Err(Error::GridMismatch("one policy schedule per attribute class expected".into()));
            }
            let contributions = classes
                .par_iter()
                .zip(schedules.par_iter())
                .map(|(c, schedule)| {
                    let grid: TriGrid = *schedule.grid();
                    let initial = BeliefDensity::default_initial(grid)?;
                    let dt = 0.8 * FpkSolver::new(grid, &c.params).dt_limit(beta_in.max());
                    let run = propagate(&initial, schedule, beta_in, dt, beta_in.t_end(), beta_in.dt(), &[], &c.params)
                        .map_err(|e| e.for_attribute(&c.id))?;
                    Ok(run.series.iter().map(|r| c.prob * r.beta).collect::<Vec<f64>>())
                })
                .collect::<Result<Vec<_>>>()?;
            let mut values = vec![0.0; beta_in.len()];
            for contribution in contributions {
                for (v, c) in values.iter_mut().zip(contribution) {
                    *v += c;
                }
            }
            MeanFieldPath::new(beta_in.dt(), values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
        }
    }
}

/// `Xi(Psi(beta))`.
pub fn response_map(beta: &MeanFieldPath, params: &ModelParams, config: &MfeConfig) -> Result<MeanFieldPath> {
    let response = best_response(beta, params, config)?;
    population_response(&response, beta, params, config)
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub converged: bool,
    pub iterations: usize,
    /// `||Xi(Psi(beta_k)) - beta_k||` per iteration.
    pub residuals: Vec<f64>,
    /// Residual of the returned path, recomputed from scratch.
    pub final_residual: f64,
    pub beta: MeanFieldPath,
    pub policies: BestResponse,
}

/// JSON-friendly part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub final_residual: f64,
    pub beta_max: f64,
    pub beta_final: f64,
    pub config: MfeConfig,
}

impl EquilibriumReport {
    pub fn summary(&self, config: &MfeConfig) -> ReportSummary {
        ReportSummary {
            converged: self.converged,
            iterations: self.iterations,
            residuals: self.residuals.clone(),
            final_residual: self.final_residual,
            beta_max: self.beta.max(),
            beta_final: self.beta.last(),
            config: config.clone(),
        }
    }
}

/// Damped Picard iteration `beta <- (1 - d) beta + d Xi(Psi(beta))` until the
/// sup-norm residual drops below `tol`. Running out of iterations is reported
/// through `converged = false`, not as an error.
pub fn find_mfe(initial: &MeanFieldPath, params: &ModelParams, config: &MfeConfig) -> Result<EquilibriumReport> {
    config.validate()?;
    params.validate()?;
    let mut beta = initial.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    for iteration in 1..=config.max_iter {
        let image = response_map(&beta, params, config)?;
        let residual = image.sup_distance(&beta)?;
        residuals.push(residual);
        log::debug!("mfe iteration {iteration}: residual {residual:e}");
        if residual < config.tol {
            converged = true;
            break;
        }
        beta = beta.mix(&image, config.damping)?;
    }
    let policies = best_response(&beta, params, config)?;
    let image = population_response(&policies, &beta, params, config)?;
    let final_residual = image.sup_distance(&beta)?;
    Ok(EquilibriumReport { converged, iterations: residuals.len(), residuals, final_residual, beta, policies })
}

/// Runs [`find_mfe`] from several starting paths. Converged equilibria whose
/// paths differ by more than `10 tol` are listed as distinct.
pub fn find_mfe_multistart(
    initials: &[MeanFieldPath],
    params: &ModelParams,
    config: &MfeConfig,
) -> Result<(Vec<EquilibriumReport>, Vec<usize>)> {
    let reports = initials.iter().map(|b| find_mfe(b, params, config)).collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<usize> = Vec::new();
    for (k, r) in reports.iter().enumerate() {
        if !r.converged {
            continue;
        }
        let seen = distinct
            .iter()
            .any(|&d| reports[d].beta.sup_distance(&r.beta).map(|x| x <= 10.0 * config.tol).unwrap_or(false));
        if !seen {
            distinct.push(k);
        }
    }
    if distinct.len() > 1 {
        log::warn!("{} distinct equilibria found", distinct.len());
    }
    Ok((reports, distinct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fully_observed::beta_crit;

    #[test]
    fn fully_observed_best_response_rows() {
        let p = ModelParams::default();
        let cfg = MfeConfig { t_end: 50.0, ..MfeConfig::fully_observed_default() };
        let high = MeanFieldPath::constant(0.5, 1.0, 50.0).unwrap();
        match best_response(&high, &p, &cfg).unwrap() {
            BestResponse::Fully(pols) => {
                assert!(pols[0].s.samples().iter().all(|&u| u == 0));
                assert_eq!((pols[0].a, pols[0].i), (0, 0));
            }
            _ => unreachable!(),
        }
        let zero = MeanFieldPath::constant(0.0, 1.0, 50.0).unwrap();
        match best_response(&zero, &p, &cfg).unwrap() {
            BestResponse::Fully(pols) => assert!(pols[0].s.samples().iter().all(|&u| u == 1)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn isolating_population_produces_no_activity() {
        let p = ModelParams::default();
        let cfg = MfeConfig { t_end: 20.0, ..MfeConfig::partially_observed_default() };
        let cfg = MfeConfig { hjb: HjbConfig::with_n(16), ..cfg };
        let beta = MeanFieldPath::constant(0.3, 1.0, 20.0).unwrap();
        let schedule = PolicySchedule::constant(crate::hjb::PolicyGrid::constant(TriGrid::new(16), 0), 1.0);
        let out = population_response(&BestResponse::Partial(vec![schedule]), &beta, &p, &cfg).unwrap();
        assert!(out.values().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn mixture_is_linear() {
        let p = ModelParams {
            attributes: vec![
                crate::model::Attribute { id: "x".into(), prob: 0.5, overrides: Default::default() },
                crate::model::Attribute { id: "y".into(), prob: 0.5, overrides: Default::default() },
            ],
            ..ModelParams::default()
        };
        let cfg = MfeConfig { t_end: 10.0, hjb: HjbConfig::with_n(16), ..MfeConfig::partially_observed_default() };
        let beta = MeanFieldPath::constant(0.1, 1.0, 10.0).unwrap();
        let g = TriGrid::new(16);
        let on = PolicySchedule::constant(crate::hjb::PolicyGrid::constant(g, 1), 1.0);
        let off = PolicySchedule::constant(crate::hjb::PolicyGrid::constant(g, 0), 1.0);
        let mixed = population_response(&BestResponse::Partial(vec![on.clone(), off]), &beta, &p, &cfg).unwrap();
        let single =
            population_response(&BestResponse::Partial(vec![on]), &beta, &ModelParams::default(), &cfg).unwrap();
        for (m, s) in mixed.values().iter().zip(single.values()) {
            assert!((m - 0.5 * s).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_start_takes_one_iteration() {
        let p = ModelParams::default();
        let cfg = MfeConfig { damping: 1.0, t_end: 100.0, ..MfeConfig::fully_observed_default() };
        let zero = MeanFieldPath::constant(0.0, 1.0, 100.0).unwrap();
        let report = find_mfe(&zero, &p, &cfg).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.final_residual, 0.0);
    }

    #[test]
    fn exhausted_iterations_are_reported() {
        let p = ModelParams::default();
        let cfg = MfeConfig { max_iter: 3, t_end: 50.0, ..MfeConfig::fully_observed_default() };
        let start = MeanFieldPath::constant(1.0, 1.0, 50.0).unwrap();
        let report = find_mfe(&start, &p, &cfg).unwrap();
        assert!(!report.converged);
        assert_eq!(report.residuals.len(), 3);
        assert!(beta_crit(&p).unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_damping() {
        let cfg = MfeConfig { damping: 0.0, ..MfeConfig::fully_observed_default() };
        assert!(cfg.validate().is_err());
    }
}
