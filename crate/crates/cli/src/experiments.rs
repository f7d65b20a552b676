//! One runner per subcommand. Every runner writes its files into the output
//! directory and returns their names.

use std::path::{Path, PathBuf};

use epimfg_core::filter::{a_bar, integrate_filter, Belief, FilterTrajectory};
use epimfg_core::fpk::{propagate, write_series_csv, write_slice_csv, BeliefDensity, FpkSolver};
use epimfg_core::fully_observed::{
    beta_crit, propagate_population, solve_susceptible_hjb, stationary_decision, write_fully_observed_csv,
    FullyObservedPolicy, StationaryDecision,
};
use epimfg_core::grid::TriGrid;
use epimfg_core::hjb::{
    extract_threshold, solve_stationary, solve_stationary_batch, write_policy_csv, write_threshold_csv, HjbConfig,
    HjbMetadata, PolicyGrid, PolicySchedule, StationarySolution,
};
use epimfg_core::io::{format_number, write_csv, write_json};
use epimfg_core::mfe::{find_mfe_multistart, MfeConfig, Mode, ReportSummary};
use epimfg_core::sim::{
    ensemble_run, estimate_objective, write_event_log, AgentPolicy, EnsembleClass, ObjectiveEstimate,
};
use epimfg_core::{phi_bar_a, phi_bar_i, r_nought, EpiState, MeanFieldPath, ModelParams};
use serde::Serialize;

use crate::error::Result;
use crate::scenario::{AgentRule, ControlRule, Scenario};

/// Output directory plus the files written so far.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    /// Registers `name` and returns its full path.
    pub fn file(&mut self, name: impl Into<String>) -> PathBuf {
        let name = name.into();
        let path = self.dir.join(&name);
        self.files.push(name);
        path
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

pub(crate) fn tag(x: f64) -> String {
    format_number(x)
}

/// Stationary solves keep their own time step and march budget; `solver.dt`
/// and `solver.t_end` apply to time-dependent runs only.
pub(crate) fn hjb_config(scenario: &Scenario, default_n: usize, reflection: bool) -> HjbConfig {
    let s = &scenario.solver;
    let base = HjbConfig::default();
    HjbConfig { n: s.n.unwrap_or(default_n), stationary_tol: s.tol.unwrap_or(base.stationary_tol), reflection, ..base }
}

pub(crate) fn belief(v: [f64; 3]) -> Result<Belief> {
    Ok(Belief::new(v[0], v[1], v[2])?)
}

#[derive(Serialize)]
struct ClassClosedForms {
    id: String,
    phi_bar_i: f64,
    phi_bar_a: f64,
    beta_crit: f64,
    r_nought: f64,
}

#[derive(Serialize)]
struct DecisionRow {
    beta_bar: f64,
    decision: StationaryDecision,
    /// Value at `t = 0` of the backward ODE sweep.
    v_s_ode: f64,
    stationary_from: Option<f64>,
}

#[derive(Serialize)]
struct FullyObservedSummary {
    classes: Vec<ClassClosedForms>,
    decisions: Vec<DecisionRow>,
}

pub fn fully_observed(scenario: &Scenario, out: &mut Outputs) -> Result<()> {
    let p = &scenario.params;
    let dt = scenario.solver.dt.unwrap_or(epimfg_core::fully_observed::DEFAULT_DT);
    let t_end = scenario.solver.t_end.unwrap_or(200.0);
    let classes = p.resolved_attributes();
    let closed = classes
        .iter()
        .map(|c| {
            Ok(ClassClosedForms {
                id: c.id.clone(),
                phi_bar_i: phi_bar_i(&c.params)?,
                phi_bar_a: phi_bar_a(&c.params)?,
                beta_crit: beta_crit(&c.params)?,
                r_nought: r_nought(&c.params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut decisions = Vec::new();
    for &b in &scenario.fully_observed.beta_bars {
        let beta = MeanFieldPath::constant(b, dt, t_end)?;
        let mut paths = Vec::new();
        let mut policies = Vec::new();
        for c in &classes {
            let path = solve_susceptible_hjb(&beta, t_end, dt, None, &c.params)?;
            policies.push(FullyObservedPolicy::from_value_path(&path, &c.params)?);
            paths.push(path);
        }
        let rho0 = vec![scenario.fully_observed.initial; classes.len()];
        let state = propagate_population(&policies, &rho0, dt, t_end, p)?;
        for (k, c) in classes.iter().enumerate() {
            let name = if classes.len() == 1 {
                format!("fully_observed_b{}.csv", tag(b))
            } else {
                format!("fully_observed_b{}_{}.csv", tag(b), c.id)
            };
            write_fully_observed_csv(out.file(name), &paths[k], &beta, &state.rho[k])?;
        }
        decisions.push(DecisionRow {
            beta_bar: b,
            decision: stationary_decision(b, &classes[0].params)?,
            v_s_ode: paths[0].v0(),
            stationary_from: paths[0].stationary_from,
        });
    }
    write_json(out.file("fully_observed.json"), &FullyObservedSummary { classes: closed, decisions })?;
    Ok(())
}

#[derive(Serialize)]
pub(crate) struct FilterRow {
    pub beta_bar: f64,
    pub a_bar: f64,
    pub sup_a: f64,
    pub margin: f64,
    pub final_belief: [f64; 3],
    pub renormalizations: usize,
}

pub(crate) fn filter_run(
    scenario: &Scenario,
    beta_bar: f64,
    policy: Option<&PolicyGrid>,
    control: ControlRule,
) -> Result<(FilterTrajectory, FilterRow)> {
    let p = &scenario.params;
    let dt = scenario.solver.dt.unwrap_or(epimfg_core::filter::DEFAULT_DT);
    let t_end = scenario.solver.t_end.unwrap_or(200.0);
    let beta = MeanFieldPath::constant(beta_bar, 1.0, t_end)?;
    let b0 = belief(scenario.filter.initial)?;
    let traj = integrate_filter(
        b0,
        |_, b| match (control, policy) {
            (ControlRule::AlwaysActive, _) => 1.0,
            (ControlRule::Isolate, _) => 0.0,
            (ControlRule::Optimal, Some(g)) => f64::from(g.at(b.s, b.a)),
            (ControlRule::Optimal, None) => unreachable!("optimal control needs a policy grid"),
        },
        &beta,
        dt,
        t_end,
        p,
    )?;
    let bar = a_bar(beta_bar, p)?;
    let last = traj.last();
    let row = FilterRow {
        beta_bar,
        a_bar: bar,
        sup_a: traj.sup_a,
        margin: bar - traj.sup_a,
        final_belief: [last.s, last.a, last.r],
        renormalizations: traj.renormalizations,
    };
    Ok((traj, row))
}

pub fn filter(scenario: &Scenario, out: &mut Outputs) -> Result<()> {
    let settings = &scenario.filter;
    let policies: Vec<Option<PolicyGrid>> = if settings.control == ControlRule::Optimal {
        let cfg = hjb_config(scenario, 64, true);
        solve_stationary_batch(&settings.beta_bars, &cfg, &scenario.params)
            .into_iter()
            .map(|s| s.map(|s| Some(s.policy)))
            .collect::<epimfg_core::Result<Vec<_>>>()?
    } else {
        vec![None; settings.beta_bars.len()]
    };
    let mut rows = Vec::new();
    for (&b, policy) in settings.beta_bars.iter().zip(&policies) {
        let (traj, row) = filter_run(scenario, b, policy.as_ref(), settings.control)?;
        traj.write_csv(out.file(format!("filter_b{}.csv", tag(b))))?;
        rows.push(row);
    }
    write_json(out.file("filter.json"), &rows)?;
    Ok(())
}

pub(crate) fn stationary_at_ratios(
    ratios: &[f64],
    cfg: &HjbConfig,
    p: &ModelParams,
) -> Result<(f64, Vec<StationarySolution>)> {
    let crit = beta_crit(p)?;
    let betas: Vec<f64> = ratios.iter().map(|r| r * crit).collect();
    if let Some(b) = betas.iter().find(|b| **b > 1.0) {
        return Err(crate::error::CliError::Scenario(format!("ratio gives beta_bar {b} > 1")));
    }
    let sols = solve_stationary_batch(&betas, cfg, p).into_iter().collect::<epimfg_core::Result<Vec<_>>>()?;
    Ok((crit, sols))
}

pub(crate) fn write_policy_maps(
    ratios: &[f64],
    sols: &[StationarySolution],
    p: &ModelParams,
    out: &mut Outputs,
) -> Result<Vec<HjbMetadata>> {
    let mut metas = Vec::new();
    for (r, sol) in ratios.iter().zip(sols) {
        write_policy_csv(out.file(format!("policy_r{}.csv", tag(*r))), &sol.value, &sol.policy)?;
        write_threshold_csv(out.file(format!("threshold_r{}.csv", tag(*r))), &extract_threshold(&sol.policy))?;
        let meta = HjbMetadata::from_solution(sol, p)?;
        meta.write(out.file(format!("hjb_r{}.json", tag(*r))))?;
        metas.push(meta);
    }
    Ok(metas)
}

pub fn hjb(scenario: &Scenario, out: &mut Outputs) -> Result<()> {
    let cfg = hjb_config(scenario, 128, scenario.hjb.reflection);
    let (_, sols) = stationary_at_ratios(&scenario.hjb.ratios, &cfg, &scenario.params)?;
    write_policy_maps(&scenario.hjb.ratios, &sols, &scenario.params, out)?;
    Ok(())
}

/// `(ratio, beta_bar, a_thresh, a_bar, edge_switches, non_threshold)` rows.
pub(crate) fn sweep_rows(ratios: &[f64], cfg: &HjbConfig, p: &ModelParams) -> Result<Vec<[f64; 6]>> {
    let (crit, sols) = stationary_at_ratios(ratios, cfg, p)?;
    ratios
        .iter()
        .zip(&sols)
        .map(|(r, sol)| {
            let summary = extract_threshold(&sol.policy);
            Ok([
                *r,
                r * crit,
                summary.edge_threshold,
                a_bar(r * crit, p)?,
                summary.edge_switches as f64,
                f64::from(u8::from(summary.non_threshold)),
            ])
        })
        .collect()
}

pub(crate) const SWEEP_HEADER: [&str; 6] = ["ratio", "beta_bar", "a_thresh", "a_bar", "edge_switches", "non_threshold"];

pub fn threshold_sweep(scenario: &Scenario, out: &mut Outputs) -> Result<()> {
    let cfg = hjb_config(scenario, 128, true);
    let rows = sweep_rows(&scenario.threshold_sweep.ratios, &cfg, &scenario.params)?;
    write_csv(out.file("threshold_sweep.csv"), &SWEEP_HEADER, rows)?;
    let probe = &scenario.threshold_sweep.lambda_ai_probe;
    if !probe.is_empty() {
        let mut rows = Vec::new();
        for &lambda_ai in probe {
            // beta_crit depends on lambda_ai, so ratios are taken per value.
            let p = ModelParams { lambda_ai, lambda_ar: 0.0, ..scenario.params.clone() };
            for row in sweep_rows(&scenario.threshold_sweep.ratios, &cfg, &p)? {
                rows.push([row[0], lambda_ai, row[1], row[2], row[4], row[5]]);
            }
        }
        write_csv(
            out.file("threshold_probe.csv"),
            &["ratio", "lambda_ai", "beta_bar", "a_thresh", "edge_switches", "non_threshold"],
            rows,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
pub(crate) struct FpkSummary {
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub max_mass_defect: f64,
    pub max_boundary_mass: f64,
    pub final_mass_triangle: f64,
}

pub(crate) fn fpk_run(scenario: &Scenario, default_n: usize, out: &mut Outputs) -> Result<FpkSummary> {
    let p = &scenario.params;
    let f = &scenario.fpk;
    let horizon = scenario.solver.t_end.unwrap_or(500.0);
    let cfg = hjb_config(scenario, default_n, true);
    let grid = TriGrid::new(cfg.n);
    let policy = match f.control {
        ControlRule::AlwaysActive => PolicyGrid::constant(grid, 1),
        ControlRule::Isolate => PolicyGrid::constant(grid, 0),
        ControlRule::Optimal => solve_stationary(f.beta, &cfg, p)?.policy,
    };
    let schedule = PolicySchedule::constant(policy, f.record_every);
    let beta = MeanFieldPath::constant(f.beta, f.record_every, horizon)?;
    let initial = BeliefDensity::gaussian_bump(grid, (f.bump_center[0], f.bump_center[1]), f.bump_width)?;
    let dt = scenario.solver.dt.unwrap_or_else(|| 0.8 * FpkSolver::new(grid, p).dt_limit(f.beta));
    let run = propagate(&initial, &schedule, &beta, dt, horizon, f.record_every, &f.slice_times, p)?;
    write_series_csv(out.file("fpk_series.csv"), &run.series)?;
    for (t, density) in &run.slices {
        write_slice_csv(out.file(format!("fpk_slice_t{}.csv", tag(*t))), density)?;
    }
    Ok(FpkSummary {
        n: grid.n(),
        dt: run.dt,
        horizon,
        max_mass_defect: run.max_mass_defect,
        max_boundary_mass: run.max_boundary_mass,
        final_mass_triangle: run.last.triangle_mass(),
    })
}

pub fn fpk(scenario: &Scenario, out: &mut Outputs) -> Result<()> {
    let summary = fpk_run(scenario, 64, out)?;
    write_json(out.file("fpk.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct MfeSummary {
    initial_betas: Vec<f64>,
    reports: Vec<ReportSummary>,
    /// Indices of the starts whose converged paths are distinct.
    distinct: Vec<usize>,
}

pub(crate) fn mfe_config(scenario: &Scenario) -> MfeConfig {
    let s = &scenario.solver;
    let base = match scenario.mfe.mode {
        Mode::FullyObserved => MfeConfig::fully_observed_default(),
        Mode::PartiallyObserved => MfeConfig::partially_observed_default(),
    };
    MfeConfig {
        damping: s.damping.unwrap_or(base.damping),
        tol: s.tol.unwrap_or(base.tol),
        max_iter: s.max_iter.unwrap_or(base.max_iter),
        t_end: s.t_end.unwrap_or(base.t_end),
        path_dt: scenario.mfe.path_dt.unwrap_or(base.path_dt),
        ode_dt: s.dt.unwrap_or(base.ode_dt),
        hjb: HjbConfig { n: s.n.unwrap_or(base.hjb.n), ..base.hjb.clone() },
        ..base
    }
}

pub fn mfe(scenario: &Scenario, out: &mut Outputs) -> Result<()> {
    let cfg = mfe_config(scenario);
    let initials = scenario
        .mfe
        .initial_betas
        .iter()
        .map(|b| MeanFieldPath::constant(*b, cfg.path_dt, cfg.t_end))
        .collect::<epimfg_core::Result<Vec<_>>>()?;
    let (reports, distinct) = find_mfe_multistart(&initials, &scenario.params, &cfg)?;
    for (k, r) in reports.iter().enumerate() {
        if !r.converged {
            log::warn!(
                "start {k}: no equilibrium within {} iterations (residual {:e})",
                r.iterations,
                r.final_residual
            );
        }
        let rows = r.beta.times().zip(r.beta.values()).map(|(t, b)| [t, *b]);
        write_csv(out.file(format!("mfe_beta_{k}.csv")), &["t", "beta"], rows)?;
    }
    write_json(
        out.file("mfe.json"),
        &MfeSummary {
            initial_betas: scenario.mfe.initial_betas.clone(),
            reports: reports.iter().map(|r| r.summary(&cfg)).collect(),
            distinct,
        },
    )?;
    Ok(())
}

/// Policy of one attribute class against the constant `beta`.
pub(crate) fn agent_policy(
    rule: AgentRule,
    beta: &MeanFieldPath,
    horizon: f64,
    hjb: &HjbConfig,
    params: &ModelParams,
) -> Result<AgentPolicy> {
    Ok(match rule {
        AgentRule::FullyObserved => {
            let path = solve_susceptible_hjb(beta, horizon, epimfg_core::fully_observed::DEFAULT_DT, None, params)?;
            AgentPolicy::fully_observed(&FullyObservedPolicy::from_value_path(&path, params)?, params.gamma)
        }
        AgentRule::Optimal => {
            let sol = solve_stationary(beta.last(), hjb, params)?;
            AgentPolicy::from_policy_grid(
                Belief::susceptible(),
                &sol.policy,
                beta,
                epimfg_core::filter::DEFAULT_DT,
                horizon,
                params,
            )?
        }
        AgentRule::AlwaysActive => AgentPolicy::pre_symptom_constant(1, params.gamma),
        AgentRule::Isolate => AgentPolicy::pre_symptom_constant(0, params.gamma),
    })
}

#[derive(Serialize)]
struct ClassObjective {
    id: String,
    estimate: ObjectiveEstimate,
    /// Stationary value of a susceptible agent, for the fully observed rule.
    v_s: Option<f64>,
}

#[derive(Serialize)]
struct MonteCarloSummary {
    agents: usize,
    seed: u64,
    final_fractions: [f64; 5],
    objective: Vec<ClassObjective>,
}

pub fn montecarlo(scenario: &Scenario, seed: u64, out: &mut Outputs) -> Result<()> {
    let m = &scenario.montecarlo;
    let horizon = scenario.solver.t_end.unwrap_or(200.0);
    // The agents' schedules cover the whole simulation window.
    let window = horizon.max(epimfg_core::sim::T_SIM) + m.record_every;
    let beta = MeanFieldPath::constant(m.beta, 1.0, window)?;
    let hjb = hjb_config(scenario, 64, true);
    let classes = scenario
        .params
        .resolved_attributes()
        .into_iter()
        .map(|c| {
            Ok(EnsembleClass {
                prob: c.prob,
                policy: agent_policy(m.policy, &beta, window, &hjb, &c.params)?,
                params: c.params,
                initial: m.initial,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (stats, records) = ensemble_run(&classes, &beta, m.agents, seed, m.record_every, horizon, m.feedback)?;
    stats.write_csv(out.file("montecarlo.csv"))?;
    if m.event_log {
        write_event_log(out.file("events.ndjson"), &records)?;
    }
    let mut objective = Vec::new();
    if let Some(n) = m.objective_agents {
        for (c, attr) in classes.iter().zip(scenario.params.resolved_attributes()) {
            let estimate = estimate_objective(&c.policy, &beta, &c.params, EpiState::S, n, seed.wrapping_add(1))?;
            let v_s = match m.policy {
                AgentRule::FullyObserved => Some(stationary_decision(m.beta, &c.params)?.v_s),
                _ => None,
            };
            objective.push(ClassObjective { id: attr.id, estimate, v_s });
        }
    }
    write_json(
        out.file("montecarlo.json"),
        &MonteCarloSummary {
            agents: m.agents,
            seed,
            final_fractions: *stats.fractions.last().expect("at least the initial bin"),
            objective,
        },
    )?;
    Ok(())
}
