//! The fully observed agent: closed-form stationary decision, the scalar
//! value ODE of a susceptible agent, and the population dynamics driven by a
//! fully observed policy.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::model::{phi_bar_a, AttributeParams, CostTable, EpiState, ModelParams};
use crate::path::MeanFieldPath;

/// Default time step for the scalar ODE and the population ODE.
pub const DEFAULT_DT: f64 = 0.05;

/// Stationarity is declared after this many consecutive small increments.
const STATIONARY_RUN: usize = 100;
const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Active,
    Isolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryDecision {
    pub beta_crit: f64,
    pub regime: Regime,
    pub v_s: f64,
    pub u_opt: u8,
}

/// Critical infected-activity level above which a susceptible agent isolates.
pub fn beta_crit(params: &ModelParams) -> Result<f64> {
    let phi_a = phi_bar_a(params)?;
    if params.lambda_sa <= 0.0 || phi_a <= 0.0 {
        return Err(Error::Degenerate("beta_crit"));
    }
    Ok(params.alpha / (params.lambda_sa * phi_a) * (1.0 + params.eta / params.gamma))
}

/// Coefficient of `u` in the susceptible value equation:
/// `lambda_sa * beta * (phi_a - v) - alpha`.
pub fn switching_m(beta: f64, v: f64, phi_a: f64, params: &ModelParams) -> f64 {
    params.lambda_sa * beta * (phi_a - v) - params.alpha
}

/// Stationary value when the agent is always active against a constant `beta`.
pub fn active_value(beta_bar: f64, phi_a: f64, params: &ModelParams) -> f64 {
    let rate = params.lambda_sa * beta_bar + params.eta;
    (rate * phi_a - params.alpha) / (rate + params.gamma)
}

/// Stationary value when the agent always isolates.
pub fn isolate_value(phi_a: f64, params: &ModelParams) -> f64 {
    params.eta * phi_a / (params.gamma + params.eta)
}

pub fn stationary_decision(beta_bar: f64, params: &ModelParams) -> Result<StationaryDecision> {
    if !(0.0..=1.0).contains(&beta_bar) {
        return Err(Error::invalid("beta_bar", format!("must lie in [0, 1], got {beta_bar}")));
    }
    let phi_a = phi_bar_a(params)?;
    let crit = beta_crit(params)?;
    Ok(if beta_bar < crit {
        StationaryDecision {
            beta_crit: crit,
            regime: Regime::Active,
            v_s: active_value(beta_bar, phi_a, params),
            u_opt: 1,
        }
    } else {
        StationaryDecision { beta_crit: crit, regime: Regime::Isolate, v_s: isolate_value(phi_a, params), u_opt: 0 }
    })
}

/// Piecewise-constant bang-bang control on a uniform grid: `u[k]` applies on
/// `[k dt, (k+1) dt)` and the last entry extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    dt: f64,
    u: Vec<u8>,
    gamma: f64,
    /// `cum[k]` is the discounted active time on `[0, k dt]`.
    cum: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(dt: f64, u: Vec<u8>, gamma: f64) -> Result<Self> {
        if !(dt > 0.0) || u.is_empty() || !(gamma > 0.0) {
            return Err(Error::invalid("control schedule", "needs dt > 0, gamma > 0 and a sample"));
        }
        let mut cum = Vec::with_capacity(u.len() + 1);
        cum.push(0.0);
        let decay = (-gamma * dt).exp();
        let mut weight = 1.0;
        for &uk in &u {
            let last = *cum.last().unwrap();
            cum.push(last + f64::from(uk) * weight * (1.0 - decay) / gamma);
            weight *= decay;
        }
        Ok(Self { dt, u, gamma, cum })
    }

    pub fn constant(u: u8, gamma: f64) -> Self {
        Self::new(1.0, vec![u], gamma).expect("valid constant schedule")
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[u8] {
        &self.u
    }

    fn segment(&self, t: f64) -> usize {
        if t <= 0.0 {
            0
        } else {
            ((t / self.dt).floor() as usize).min(self.u.len() - 1)
        }
    }

    pub fn at(&self, t: f64) -> u8 {
        self.u[self.segment(t)]
    }

    /// `int_0^t exp(-gamma s) u(s) ds`.
    fn discounted_active_to(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.segment(t);
        let start = k as f64 * self.dt;
        self.cum[k] + f64::from(self.u[k]) * ((-self.gamma * start).exp() - (-self.gamma * t).exp()) / self.gamma
    }

    /// `int_{t0}^{t1} exp(-gamma s) u(s) ds`.
    pub fn discounted_active(&self, t0: f64, t1: f64) -> f64 {
        self.discounted_active_to(t1) - self.discounted_active_to(t0)
    }
}

/// Deterministic fully observed policy: a time-dependent activity in S and
/// constant activities in A and I.
#[derive(Debug, Clone, PartialEq)]
pub struct FullyObservedPolicy {
    pub s: ControlSchedule,
    pub a: u8,
    pub i: u8,
}

impl FullyObservedPolicy {
    /// Optimal activity in A and I: active only if the reward beats the
    /// altruistic cost, since activity there does not change the dynamics.
    pub fn infected_rows(params: &ModelParams) -> (u8, u8) {
        let table = CostTable::from_params(params);
        (u8::from(table.activity_slope(EpiState::A) < 0.0), u8::from(table.activity_slope(EpiState::I) < 0.0))
    }

    pub fn from_value_path(path: &SusceptibleValuePath, params: &ModelParams) -> Result<Self> {
        let (a, i) = Self::infected_rows(params);
        Ok(Self { s: ControlSchedule::new(path.dt, path.u.clone(), params.gamma)?, a, i })
    }

    pub fn constant(s: u8, a: u8, i: u8, gamma: f64) -> Self {
        Self { s: ControlSchedule::constant(s, gamma), a, i }
    }

    pub fn at(&self, x: EpiState, t: f64) -> u8 {
        match x {
            EpiState::S => self.s.at(t),
            EpiState::A => self.a,
            EpiState::I => self.i,
            EpiState::R | EpiState::D => 0,
        }
    }
}

/// Backward-integrated value of a susceptible agent on `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibleValuePath {
    pub dt: f64,
    pub v: Vec<f64>,
    pub u: Vec<u8>,
    /// Time at which the backward sweep detected stationarity, if it did.
    pub stationary_from: Option<f64>,
}

impl SusceptibleValuePath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.v.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn v0(&self) -> f64 {
        self.v[0]
    }
}

/// Integrates the susceptible value equation backward from `horizon` with
/// RK4. `terminal` defaults to the stationary value at `beta(horizon)`.
pub fn solve_susceptible_hjb(
    beta: &MeanFieldPath,
    horizon: f64,
    dt: f64,
    terminal: Option<f64>,
    params: &ModelParams,
) -> Result<SusceptibleValuePath> {
    if !(dt > 0.0) || !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("dt/horizon", format!("need positive values, got {dt}, {horizon}")));
    }
    let phi_a = phi_bar_a(params)?;
    let steps = (horizon / dt - 1e-9).ceil() as usize;
    let dt = horizon / steps as f64;
    let v_terminal = match terminal {
        Some(v) if v.is_finite() => v,
        Some(v) => return Err(Error::invalid("terminal", format!("must be finite, got {v}"))),
        None => stationary_decision(beta.at(horizon).clamp(0.0, 1.0), params)?.v_s,
    };

    // In reversed time tau = horizon - t the equation reads
    // dv/dtau = eta phi_a + min(0, M) - (gamma + eta) v.
    let rhs = |t: f64, v: f64| {
        let m = switching_m(beta.at(t), v, phi_a, params);
        params.eta * phi_a + m.min(0.0) - (params.gamma + params.eta) * v
    };

    let mut v = vec![0.0; steps + 1];
    v[steps] = v_terminal;
    let mut calm = 0usize;
    let mut stationary_from = None;
    let mut k = steps;
    while k > 0 {
        let t = k as f64 * dt;
        let current = v[k];
        let k1 = rhs(t, current);
        let k2 = rhs(t - 0.5 * dt, current + 0.5 * dt * k1);
        let k3 = rhs(t - 0.5 * dt, current + 0.5 * dt * k2);
        let k4 = rhs(t - dt, current + dt * k3);
        let next = current + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::invalid("v_s", format!("non-finite value at t = {}", t - dt)));
        }
        v[k - 1] = next;
        k -= 1;
        calm = if (next - current).abs() < STATIONARY_TOL { calm + 1 } else { 0 };
        if calm >= STATIONARY_RUN && k > 0 && beta.is_constant_from(0.0, 0.0) {
            // Beta is constant on the remaining interval and the value has
            // settled, so the rest of the backward sweep is a fixed point.
            stationary_from = Some(k as f64 * dt);
            for vk in v[..k].iter_mut() {
                *vk = next;
            }
            break;
        }
    }
    let u = v
        .iter()
        .enumerate()
        .map(|(k, &vk)| u8::from(switching_m(beta.at(k as f64 * dt), vk, phi_a, params) < 0.0))
        .collect();
    Ok(SusceptibleValuePath { dt, v, u, stationary_from })
}

/// Fully observed population trajectories, one per attribute class.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub dt: f64,
    pub ids: Vec<String>,
    /// `rho[theta][k]` holds `(S, A, I, R, D)` at `t_k`.
    pub rho: Vec<Vec<[f64; 5]>>,
    pub beta: Vec<f64>,
}

impl PopulationState {
    pub fn beta_path(&self) -> Result<MeanFieldPath> {
        MeanFieldPath::new(self.dt, self.beta.iter().map(|b| b.clamp(0.0, 1.0)).collect())
    }
}

fn population_rhs(
    t: f64,
    rho: &[[f64; 5]],
    classes: &[AttributeParams],
    policies: &[FullyObservedPolicy],
) -> (Vec<[f64; 5]>, f64) {
    let beta: f64 = classes
        .iter()
        .zip(policies)
        .zip(rho)
        .map(|((c, pol), r)| c.prob * (r[1] * f64::from(pol.a) + r[2] * f64::from(pol.i)))
        .sum();
    let out = classes
        .iter()
        .zip(policies)
        .zip(rho)
        .map(|((c, pol), r)| {
            let p = &c.params;
            let infect = (p.lambda_sa * beta * f64::from(pol.s.at(t)) + p.eta) * r[0];
            let out_a = (p.lambda_ai + p.lambda_ar) * r[1];
            let out_i = (p.lambda_ir + p.lambda_id) * r[2];
            [
                -infect,
                infect - out_a,
                p.lambda_ai * r[1] - out_i,
                p.lambda_ar * r[1] + p.lambda_ir * r[2],
                p.lambda_id * r[2],
            ]
        })
        .collect();
    (out, beta)
}

fn observed_beta(rho: &[[f64; 5]], classes: &[AttributeParams], policies: &[FullyObservedPolicy]) -> f64 {
    classes
        .iter()
        .zip(policies)
        .zip(rho)
        .map(|((c, pol), r)| c.prob * (r[1] * f64::from(pol.a) + r[2] * f64::from(pol.i)))
        .sum()
}

/// RK4 integration of the population equations for every attribute class,
/// with `beta` recomputed from the current state at every stage.
pub fn propagate_population(
    policies: &[FullyObservedPolicy],
    rho0: &[[f64; 5]],
    dt: f64,
    horizon: f64,
    params: &ModelParams,
) -> Result<PopulationState> {
    let classes = params.resolved_attributes();
    if policies.len() != classes.len() || rho0.len() != classes.len() {
        return Err(Error::GridMismatch(format!(
            "{} attribute classes but {} policies and {} initial states",
            classes.len(),
            policies.len(),
            rho0.len()
        )));
    }
    for (c, r) in classes.iter().zip(rho0) {
        let total: f64 = r.iter().sum();
        if r.iter().any(|x| *x < 0.0 || !x.is_finite()) || (total - 1.0).abs() > 1e-8 {
            return Err(Error::MassViolation {
                t: 0.0,
                detail: format!("initial state of `{}` is not a pmf: {r:?}", c.id),
            });
        }
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("dt/horizon", "need dt > 0 and horizon >= 0"));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { dt } else { horizon / steps as f64 };

    let mut rho: Vec<Vec<[f64; 5]>> = classes.iter().map(|_| Vec::with_capacity(steps + 1)).collect();
    let mut beta = Vec::with_capacity(steps + 1);
    let mut state: Vec<[f64; 5]> = rho0.to_vec();
    for (traj, s) in rho.iter_mut().zip(&state) {
        traj.push(*s);
    }
    beta.push(observed_beta(&state, &classes, policies));

    let axpy = |base: &[[f64; 5]], k: &[[f64; 5]], c: f64| -> Vec<[f64; 5]> {
        base.iter()
            .zip(k)
            .map(|(b, d)| {
                let mut o = *b;
                for i in 0..5 {
                    o[i] += c * d[i];
                }
                o
            })
            .collect()
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        let (k1, _) = population_rhs(t, &state, &classes, policies);
        let (k2, _) = population_rhs(t + 0.5 * dt, &axpy(&state, &k1, 0.5 * dt), &classes, policies);
        let (k3, _) = population_rhs(t + 0.5 * dt, &axpy(&state, &k2, 0.5 * dt), &classes, policies);
        let (k4, _) = population_rhs(t + dt, &axpy(&state, &k3, dt), &classes, policies);
        for (idx, s) in state.iter_mut().enumerate() {
            for i in 0..5 {
                s[i] += dt / 6.0 * (k1[idx][i] + 2.0 * k2[idx][i] + 2.0 * k3[idx][i] + k4[idx][i]);
            }
            let total: f64 = s.iter().sum();
            if (total - 1.0).abs() > 1e-8 || s.iter().any(|x| *x < -1e-12 || !x.is_finite()) {
                return Err(Error::MassViolation {
                    t: t + dt,
                    detail: format!("class `{}` state {s:?}", classes[idx].id),
                });
            }
            for x in s.iter_mut() {
                *x = x.max(0.0);
            }
        }
        for (traj, s) in rho.iter_mut().zip(&state) {
            traj.push(*s);
        }
        beta.push(observed_beta(&state, &classes, policies));
    }
    Ok(PopulationState { dt, ids: classes.into_iter().map(|c| c.id).collect(), rho, beta })
}

/// Fully observed mean-field equilibrium from a constant initial guess.
pub fn fully_observed_mfe(params: &ModelParams, initial_beta: f64) -> Result<crate::mfe::EquilibriumReport> {
    let config = crate::mfe::MfeConfig::fully_observed_default();
    let initial = MeanFieldPath::constant(initial_beta, config.path_dt, config.t_end)?;
    crate::mfe::find_mfe(&initial, params, &config)
}

/// One CSV per attribute class with columns
/// `t, v_s, u_opt, beta, rho_s, rho_a, rho_i, rho_r, rho_d`.
/// All inputs must share the time grid.
pub fn write_fully_observed_csv(
    path: impl AsRef<Path>,
    values: &SusceptibleValuePath,
    beta: &MeanFieldPath,
    rho: &[[f64; 5]],
) -> Result<()> {
    if values.v.len() != rho.len() {
        return Err(Error::GridMismatch(format!(
            "{} value samples but {} population samples",
            values.v.len(),
            rho.len()
        )));
    }
    let rows = values.times().enumerate().map(|(k, t)| {
        let r = rho[k];
        [t, values.v[k], f64::from(values.u[k]), beta.at(t), r[0], r[1], r[2], r[3], r[4]]
    });
    write_csv(path, &["t", "v_s", "u_opt", "beta", "rho_s", "rho_a", "rho_i", "rho_r", "rho_d"], rows)
}
