//! Oracle cross-checks that run in minutes. Besides `validate.json` the run
//! writes the policy maps, threshold sweep, filter trajectories and FPK series
//! it checked.

use epimfg_core::filter::barrier_derivative;
use epimfg_core::fully_observed::{
    active_value, beta_crit, isolate_value, solve_susceptible_hjb, stationary_decision, switching_m,
    FullyObservedPolicy, Regime,
};
use epimfg_core::io::{write_csv, write_json};
use epimfg_core::mfe::{find_mfe, MfeConfig};
use epimfg_core::sim::{estimate_objective, simulate_agent, AgentPolicy};
use epimfg_core::{phi_bar_a, phi_bar_i, EpiState, MeanFieldPath};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiments::{
    filter_run, fpk_run, hjb_config, stationary_at_ratios, sweep_rows, tag, write_policy_maps, Outputs, SWEEP_HEADER,
};
use crate::scenario::{ControlRule, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Largest admissible `|value - target|`, or the bound for one-sided checks.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, target, tolerance, pass: (value - target).abs() <= tolerance }
    }

    fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, target: bound, tolerance: 0.0, pass: value < bound }
    }

    fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(ok)), target: 1.0, tolerance: 0.0, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub phi_bar_i: f64,
    pub phi_bar_a: f64,
    pub beta_crit: f64,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

fn fully_observed_checks(scenario: &Scenario, checks: &mut Vec<Check>) -> Result<()> {
    let p = &scenario.params;
    let crit = beta_crit(p)?;
    let phi_a = phi_bar_a(p)?;
    let below = stationary_decision(crit * (1.0 - 1e-9), p)?;
    let above = stationary_decision(crit, p)?;
    checks.push(Check::holds(
        "regime_flips_at_beta_crit",
        below.regime == Regime::Active && above.regime == Regime::Isolate,
    ));
    checks.push(Check::within(
        "value_branches_agree_at_beta_crit",
        active_value(crit, phi_a, p),
        isolate_value(phi_a, p),
        1e-9,
    ));
    let sign_ok = (0..100).all(|k| {
        let b = k as f64 / 99.0;
        if b == crit {
            return true;
        }
        match stationary_decision(b, p) {
            Ok(d) => (switching_m(b, d.v_s, phi_a, p) < 0.0) == (b < crit),
            Err(_) => false,
        }
    });
    checks.push(Check::holds("switching_sign_on_grid", sign_ok));
    for &b in &scenario.fully_observed.beta_bars {
        let beta = MeanFieldPath::constant(b, 1.0, 2000.0)?;
        let path = solve_susceptible_hjb(&beta, 2000.0, 0.05, Some(0.0), p)?;
        checks.push(Check::within(
            format!("ode_reaches_stationary_value_b{}", tag(b)),
            path.v0(),
            stationary_decision(b, p)?.v_s,
            1e-5,
        ));
    }
    let cfg = MfeConfig::fully_observed_default();
    for start in [0.0, 0.5, 1.0] {
        let initial = MeanFieldPath::constant(start, cfg.path_dt, cfg.t_end)?;
        let report = find_mfe(&initial, p, &cfg)?;
        checks.push(Check::holds(
            format!("fully_observed_mfe_converges_from_{}", tag(start)),
            report.converged && report.iterations <= 50,
        ));
        checks.push(Check::below(format!("fully_observed_mfe_beta_max_from_{}", tag(start)), report.beta.max(), 1e-6));
    }
    Ok(())
}

fn filter_checks(scenario: &Scenario, out: &mut Outputs, checks: &mut Vec<Check>) -> Result<()> {
    let p = &scenario.params;
    let mut rows = Vec::new();
    for &b in &scenario.filter.beta_bars {
        let (traj, row) = filter_run(scenario, b, None, ControlRule::AlwaysActive)?;
        traj.write_csv(out.file(format!("filter_b{}.csv", tag(b))))?;
        checks.push(Check::below(format!("filter_below_barrier_b{}", tag(b)), row.sup_a, row.a_bar));
        let derivative_ok = (0..50).all(|k| {
            let s = (1.0 - row.a_bar) * k as f64 / 49.0;
            barrier_derivative(s, b, p) <= 0.0
        });
        checks.push(Check::holds(format!("barrier_derivative_nonpositive_b{}", tag(b)), derivative_ok));
        let drift = traj
            .beliefs
            .chunks(1000)
            .map(|c| {
                let start = c[0].s + c[0].a + c[0].r;
                c.iter().map(|x| (x.s + x.a + x.r - start).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        checks.push(Check::below(format!("filter_conservation_b{}", tag(b)), drift, 1e-10));
        rows.push(row);
    }
    write_json(out.file("filter.json"), &rows)?;
    Ok(())
}

fn hjb_checks(scenario: &Scenario, out: &mut Outputs, checks: &mut Vec<Check>) -> Result<()> {
    let p = &scenario.params;
    let cfg = hjb_config(scenario, 32, true);
    let ratios = &scenario.hjb.ratios;
    let (_, sols) = stationary_at_ratios(ratios, &cfg, p)?;
    let metas = write_policy_maps(ratios, &sols, p, out)?;
    let phi_a = phi_bar_a(p)?;
    for ((r, sol), meta) in ratios.iter().zip(&sols).zip(&metas) {
        let g = sol.policy.grid;
        let interior = g.nodes().filter(|&(_, i, j)| g.is_interior(i, j)).count();
        let active = sol.policy.active_interior_nodes();
        let shape_ok = if *r > 1.0 { active == 0 } else { active > 0 && active < interior };
        checks.push(Check::holds(format!("policy_regions_r{}", tag(*r)), shape_ok));
        checks.push(Check::below(
            format!("boundary_residual_r{}", tag(*r)),
            meta.boundary_residual,
            5e-3 * phi_a.abs(),
        ));
        checks.push(Check::below(
            format!("reflection_residual_r{}", tag(*r)),
            meta.reflection_residual,
            1e-2 * (phi_a - p.phi_r).abs(),
        ));
    }
    let mut sorted: Vec<(f64, f64)> = ratios.iter().zip(&sols).map(|(r, s)| (*r, s.policy.active_area())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    checks.push(Check::holds("active_area_nonincreasing", sorted.windows(2).all(|w| w[1].1 <= w[0].1)));

    let rows = sweep_rows(&scenario.threshold_sweep.ratios, &cfg, p)?;
    write_csv(out.file("threshold_sweep.csv"), &SWEEP_HEADER, rows.iter())?;
    let mut by_ratio = rows.clone();
    by_ratio.sort_by(|a, b| a[0].total_cmp(&b[0]));
    checks.push(Check::holds("threshold_nonincreasing", by_ratio.windows(2).all(|w| w[1][2] <= w[0][2])));
    checks.push(Check::holds("a_bar_increasing", by_ratio.windows(2).all(|w| w[1][3] > w[0][3])));
    Ok(())
}

fn monte_carlo_checks(scenario: &Scenario, seed: u64, checks: &mut Vec<Check>) -> Result<()> {
    let p = &scenario.params;
    let n = scenario.validate.agents;
    let beta = MeanFieldPath::constant(0.15, 1.0, epimfg_core::sim::T_SIM)?;
    let isolate = AgentPolicy::pre_symptom_constant(0, p.gamma);
    let first = (0..n as u64)
        .into_par_iter()
        .map(|k| simulate_agent(&isolate, &beta, p, EpiState::A, seed, k).map(|r| r.jumps[1]))
        .collect::<epimfg_core::Result<Vec<_>>>()?;
    let exit = p.lambda_ai + p.lambda_ar;
    let hold = first.iter().map(|j| j.0).sum::<f64>() / n as f64;
    let to_i = first.iter().filter(|j| j.1 == EpiState::I).count() as f64 / n as f64;
    checks.push(Check::within("mc_holding_time_a", hold, 1.0 / exit, 0.01 / exit));
    checks.push(Check::within("mc_branching_a_to_i", to_i, p.lambda_ai / exit, 0.01 * p.lambda_ai / exit));

    let path = solve_susceptible_hjb(&beta, beta.t_end(), 0.05, None, p)?;
    let optimal = AgentPolicy::fully_observed(&FullyObservedPolicy::from_value_path(&path, p)?, p.gamma);
    for (name, x0, target) in [
        ("mc_objective_s", EpiState::S, stationary_decision(0.15, p)?.v_s),
        ("mc_objective_i", EpiState::I, phi_bar_i(p)?),
    ] {
        let est = estimate_objective(&optimal, &beta, p, x0, n, seed.wrapping_add(1))?;
        checks.push(Check::within(name, est.mean, target, 3.0 * est.stderr + est.tail_bound));
    }
    Ok(())
}

pub fn validate(scenario: &Scenario, seed: u64, out: &mut Outputs) -> Result<ValidationReport> {
    let p = &scenario.params;
    let mut checks = Vec::new();
    fully_observed_checks(scenario, &mut checks)?;
    filter_checks(scenario, out, &mut checks)?;
    hjb_checks(scenario, out, &mut checks)?;
    let fpk = fpk_run(scenario, 32, out)?;
    checks.push(Check::below("fpk_mass_defect", fpk.max_mass_defect, 1e-6 * fpk.horizon));
    monte_carlo_checks(scenario, seed, &mut checks)?;
    let report = ValidationReport {
        seed,
        phi_bar_i: phi_bar_i(p)?,
        phi_bar_a: phi_bar_a(p)?,
        beta_crit: beta_crit(p)?,
        all_passed: checks.iter().all(|c| c.pass),
        checks,
    };
    write_json(out.file("validate.json"), &report)?;
    Ok(report)
}

/// Names of the failed checks, as an error.
pub fn failures(report: &ValidationReport) -> Option<CliError> {
    let failed: Vec<String> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    (!failed.is_empty()).then_some(CliError::Validation(failed))
}
