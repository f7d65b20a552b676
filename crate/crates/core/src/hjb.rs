//! Value function and bang-bang policy of a partially observed agent on the
//! belief triangle.
//!
//! Space is discretised on a [`TriGrid`] with an upwind jump stencil, which
//! turns the value equation into the Bellman equation of a continuous-time
//! Markov chain on the nodes. Time is explicit Euler, marching backward from a
//! terminal condition until the value is stationary or `t = 0` is reached.
//!
//! With the reflection constraint enabled, only nodes with `a <= r` are
//! solved; the remaining values are set from their mirror node by
//! `phi(s, a) = phi(s, r) + (a - r) (phi_a - phi_r)`. The `s = 0` edge is
//! overwritten with `a phi_a + (1 - a) phi_r` after every step.

use std::collections::VecDeque;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{drift_stencil, Stencil, TriGrid};
use crate::io::{write_csv, write_json};
use crate::model::{phi_bar_a, phi_bar_i, ModelParams};
use crate::path::MeanFieldPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjbConfig {
    pub n: usize,
    /// Time step; `None` picks 0.8 of the monotonicity limit.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    pub stationary_tol: f64,
    pub stationary_run: usize,
    /// Solve only `a <= r` and fill the rest by reflection.
    pub reflection: bool,
}

impl Default for HjbConfig {
    fn default() -> Self {
        Self { n: 128, dt: None, t_end: 2000.0, stationary_tol: 1e-8, stationary_run: 50, reflection: true }
    }
}

impl HjbConfig {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }
}

/// Value function samples on the grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub grid: TriGrid,
    pub t: f64,
    pub phi: Vec<f64>,
}

/// Bang-bang policy on the grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub grid: TriGrid,
    pub t: f64,
    pub u: Vec<u8>,
}

impl PolicyGrid {
    pub fn constant(grid: TriGrid, u: u8) -> Self {
        Self { grid, t: 0.0, u: vec![u; grid.len()] }
    }

    /// Policy at the node nearest to `(s, a)`.
    pub fn at(&self, s: f64, a: f64) -> u8 {
        self.u[nearest_node(&self.grid, s, a)]
    }

    /// Quadrature area of the active region.
    pub fn active_area(&self) -> f64 {
        self.grid.weights().iter().zip(&self.u).map(|(w, u)| w * f64::from(*u)).sum()
    }

    pub fn active_interior_nodes(&self) -> usize {
        self.grid.nodes().filter(|&(k, i, j)| self.grid.is_interior(i, j) && self.u[k] == 1).count()
    }
}

/// Storage index of the node closest to `(s, a)`, clamped into the triangle.
pub fn nearest_node(grid: &TriGrid, s: f64, a: f64) -> usize {
    let n = grid.n();
    let x = (s.clamp(0.0, 1.0) * n as f64).round() as usize;
    let y = (a.clamp(0.0, 1.0) * n as f64).round() as usize;
    let (mut i, mut j) = (x.min(n), y.min(n));
    while i + j > n {
        // Step back toward the point along the coordinate that overshoots most.
        let over_i = i as f64 - s * n as f64;
        let over_j = j as f64 - a * n as f64;
        if over_i >= over_j && i > 0 {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    grid.index(i, j)
}

/// Terminal condition `phi_T(s, a) = a phi_a + (1 - a) phi_r` below the
/// reflection line, and its reflection above it.
pub fn terminal_condition(grid: &TriGrid, params: &ModelParams) -> Result<ValueGrid> {
    let phi_a = phi_bar_a(params)?;
    let phi_r = params.phi_r;
    let lower = |a: f64| a * phi_a + (1.0 - a) * phi_r;
    let phi = grid
        .nodes()
        .map(|(_, i, j)| {
            let (s, a) = grid.coords(i, j);
            if grid.in_lower_half(i, j) {
                lower(a)
            } else {
                lower(1.0 - s - a) + (2.0 * a + s - 1.0) * (phi_a - phi_r)
            }
        })
        .collect();
    Ok(ValueGrid { grid: *grid, t: f64::NAN, phi })
}

/// Precomputed per-node coefficients of the discrete value equation.
#[derive(Debug, Clone)]
pub struct HjbOperator {
    grid: TriGrid,
    phi_r: f64,
    stencils: Vec<Stencil>,
    /// Sources `(1 - s - a) gamma phi_r + a c_h_a + a lambda_ai phi_i`.
    src: Vec<f64>,
    /// `gamma + a lambda_ai`.
    decay: Vec<f64>,
    /// Activity cost without the infection term: `a (c_a - alpha) - s alpha`.
    m0: Vec<f64>,
    /// Node `(i - 1, j + 1)` and `lambda_sa s / h` for the infection term.
    diag: Vec<(usize, f64)>,
    solved: Vec<usize>,
    reflected: Vec<(usize, usize, f64)>,
    /// `s = 0` nodes, their exact value, and whether the node is solved.
    edge: Vec<(usize, f64, bool)>,
    params_gamma: f64,
    lambda_ai: f64,
    phi_i: f64,
}

impl HjbOperator {
    pub fn new(grid: TriGrid, params: &ModelParams, reflection: bool) -> Result<Self> {
        let phi_a = phi_bar_a(params)?;
        let phi_i = phi_bar_i(params)?;
        let phi_r = params.phi_r;
        let h = grid.h();
        let len = grid.len();
        let mut stencils = Vec::with_capacity(len);
        let mut src = Vec::with_capacity(len);
        let mut decay = Vec::with_capacity(len);
        let mut m0 = Vec::with_capacity(len);
        let mut diag = Vec::with_capacity(len);
        let mut solved = Vec::new();
        let mut reflected = Vec::new();
        let mut edge = Vec::new();
        for (k, i, j) in grid.nodes() {
            let (s, a) = grid.coords(i, j);
            let r = (1.0 - s - a).max(0.0);
            stencils.push(drift_stencil(&grid, i, j, params));
            src.push(r * params.gamma * phi_r + a * params.c_h_a + a * params.lambda_ai * phi_i);
            decay.push(params.gamma + a * params.lambda_ai);
            m0.push(a * (params.c_a - params.alpha) - s * params.alpha);
            diag.push(if i > 0 { (grid.index(i - 1, j + 1), params.lambda_sa * s / h) } else { (k, 0.0) });
            if !reflection || grid.in_lower_half(i, j) {
                solved.push(k);
            } else {
                let (p, q) = grid.mirror(i, j);
                let shift = (2 * j + i) as f64 * h - 1.0;
                reflected.push((k, grid.index(p, q), shift * (phi_a - phi_r)));
            }
            if i == 0 {
                let is_solved = !reflection || grid.in_lower_half(i, j);
                edge.push((k, a * phi_a + (1.0 - a) * phi_r, is_solved));
            }
        }
        Ok(Self {
            grid,
            phi_r,
            stencils,
            src,
            decay,
            m0,
            diag,
            solved,
            reflected,
            edge,
            params_gamma: params.gamma,
            lambda_ai: params.lambda_ai,
            phi_i,
        })
    }

    pub fn grid(&self) -> &TriGrid {
        &self.grid
    }

    /// Largest stable time step for infection levels up to `beta_max`.
    pub fn dt_limit(&self, beta_max: f64) -> f64 {
        let rate = self
            .solved
            .iter()
            .map(|&k| self.stencils[k].total_rate() + beta_max * self.diag[k].1 + self.decay[k])
            .fold(0.0, f64::max);
        1.0 / rate
    }

    /// `L phi` at every node.
    pub fn apply_l(&self, phi: &[f64]) -> Vec<f64> {
        self.grid
            .nodes()
            .map(|(k, i, j)| {
                let (s, a) = self.grid.coords(i, j);
                let r = (1.0 - s - a).max(0.0);
                let transport: f64 = self.stencils[k].iter().map(|(t, w)| w * (phi[t] - phi[k])).sum();
                r * self.params_gamma * self.phi_r + a * self.lambda_ai * (self.phi_i - phi[k]) + transport
            })
            .collect()
    }

    /// Coefficient `M` of `u` at every node.
    pub fn apply_m(&self, phi: &[f64], beta: f64) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.m_at(phi, beta, k)).collect()
    }

    fn m_at(&self, phi: &[f64], beta: f64, k: usize) -> f64 {
        let (d, c) = self.diag[k];
        self.m0[k] + beta * c * (phi[d] - phi[k])
    }

    pub fn policy(&self, phi: &[f64], beta: f64, t: f64) -> PolicyGrid {
        PolicyGrid {
            grid: self.grid,
            t,
            u: (0..self.grid.len()).map(|k| u8::from(self.m_at(phi, beta, k) < 0.0)).collect(),
        }
    }

    /// Fills reflected nodes and the `s = 0` edge. Returns the largest edge
    /// correction.
    fn constrain(&self, phi: &mut [f64]) -> f64 {
        let mut correction: f64 = 0.0;
        for &(k, exact, is_solved) in &self.edge {
            if is_solved {
                correction = correction.max((phi[k] - exact).abs());
            }
            phi[k] = exact;
        }
        for &(k, m, shift) in &self.reflected {
            phi[k] = phi[m] + shift;
        }
        correction
    }

    /// One backward step `phi(t) -> phi(t - dt)` at infection level `beta`.
    /// Returns the sup-norm increment and the edge correction.
    fn step(&self, phi: &[f64], next: &mut [f64], beta: f64, dt: f64) -> (f64, f64) {
        next.copy_from_slice(phi);
        for &k in &self.solved {
            let pk = phi[k];
            let transport: f64 = self.stencils[k].iter().map(|(t, w)| w * (phi[t] - pk)).sum();
            let m = self.m_at(phi, beta, k);
            next[k] = pk + dt * (self.src[k] - self.decay[k] * pk + transport + m.min(0.0));
        }
        let correction = self.constrain(next);
        let increment = phi.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (increment, correction)
    }

    fn resolve_dt(&self, requested: Option<f64>, beta_max: f64) -> Result<f64> {
        let limit = self.dt_limit(beta_max);
        match requested {
            None => Ok(0.8 * limit),
            Some(dt) if dt > 0.0 && dt <= limit => Ok(dt),
            Some(dt) => Err(Error::Cfl { dt, limit }),
        }
    }
}

/// Result of a stationary solve at constant `beta`.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub beta: f64,
    pub value: ValueGrid,
    pub policy: PolicyGrid,
    pub dt: f64,
    pub steps: usize,
    /// Backward time marched before stationarity was detected.
    pub elapsed: f64,
    pub last_increment: f64,
    /// Largest overwrite applied on `s = 0` in the final step.
    pub boundary_correction: f64,
}

/// Marches backward from the terminal condition at constant `beta` until the
/// sup-norm increment stays below the tolerance for the configured run.
pub fn solve_stationary(beta: f64, config: &HjbConfig, params: &ModelParams) -> Result<StationarySolution> {
    let op = HjbOperator::new(TriGrid::new(config.n), params, config.reflection)?;
    solve_stationary_with(&op, beta, config, terminal_condition(op.grid(), params)?.phi)
}

/// Stationary solve from a given starting value.
pub fn solve_stationary_with(
    op: &HjbOperator,
    beta: f64,
    config: &HjbConfig,
    start: Vec<f64>,
) -> Result<StationarySolution> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidBeta { index: 0, value: beta });
    }
    check_grid(config)?;
    let dt = op.resolve_dt(config.dt, beta)?;
    let mut phi = start;
    op.constrain(&mut phi);
    let mut next = vec![0.0; phi.len()];
    let max_steps = (config.t_end / dt).ceil() as usize;
    let mut calm = 0;
    let mut increment = f64::INFINITY;
    for step in 1..=max_steps {
        let (inc, correction) = op.step(&phi, &mut next, beta, dt);
        std::mem::swap(&mut phi, &mut next);
        if !inc.is_finite() {
            return Err(Error::NotStationary { t_end: step as f64 * dt, residual: inc });
        }
        increment = inc;
        calm = if inc < config.stationary_tol { calm + 1 } else { 0 };
        if calm >= config.stationary_run {
            let policy = op.policy(&phi, beta, 0.0);
            return Ok(StationarySolution {
                beta,
                value: ValueGrid { grid: op.grid, t: 0.0, phi },
                policy,
                dt,
                steps: step,
                elapsed: step as f64 * dt,
                last_increment: inc,
                boundary_correction: correction,
            });
        }
    }
    Err(Error::NotStationary { t_end: config.t_end, residual: increment })
}

/// Stationary solves for several `beta` values, in input order.
pub fn solve_stationary_batch(
    betas: &[f64],
    config: &HjbConfig,
    params: &ModelParams,
) -> Vec<Result<StationarySolution>> {
    betas.par_iter().map(|&b| solve_stationary(b, config, params)).collect()
}

fn check_grid(config: &HjbConfig) -> Result<()> {
    if config.n < 4 {
        return Err(Error::invalid("n", format!("grid resolution must be >= 4, got {}", config.n)));
    }
    if !(config.t_end > 0.0) {
        return Err(Error::invalid("t_end", "must be positive"));
    }
    Ok(())
}

/// Terminal data for a time-dependent solve.
#[derive(Debug, Clone)]
pub enum Terminal {
    /// [`terminal_condition`].
    Formula,
    /// Stationary value at `beta(T)`, so that the path continues stationarily.
    StationaryTail,
    Given(Vec<f64>),
}

/// Policies on the time grid of the driving path.
#[derive(Debug, Clone)]
pub struct PolicySchedule {
    pub path_dt: f64,
    pub policies: Vec<PolicyGrid>,
}

impl PolicySchedule {
    pub fn constant(policy: PolicyGrid, path_dt: f64) -> Self {
        Self { path_dt, policies: vec![policy] }
    }

    pub fn grid(&self) -> &TriGrid {
        &self.policies[0].grid
    }

    /// Policy in force at `t`: the slice at the start of the path interval
    /// containing `t`, constant past the last slice.
    pub fn at(&self, t: f64) -> &PolicyGrid {
        let k = if t <= 0.0 { 0 } else { ((t / self.path_dt + 1e-9).floor() as usize).min(self.policies.len() - 1) };
        &self.policies[k]
    }
}

#[derive(Debug, Clone)]
pub struct HjbSolution {
    pub dt: f64,
    pub schedule: PolicySchedule,
    /// Values at the path times, if requested.
    pub values: Vec<ValueGrid>,
    pub value0: ValueGrid,
    pub max_boundary_correction: f64,
}

/// Backward solve on `[0, T]`, `T = beta.t_end()`, recording the policy at
/// every sample time of `beta`. The solver step divides the path step.
pub fn solve_hjb(
    beta: &MeanFieldPath,
    config: &HjbConfig,
    terminal: Terminal,
    keep_values: bool,
    params: &ModelParams,
) -> Result<HjbSolution> {
    check_grid(config)?;
    let op = HjbOperator::new(TriGrid::new(config.n), params, config.reflection)?;
    let beta_max = beta.max();
    let limit = op.dt_limit(beta_max);
    let target = match config.dt {
        None => 0.8 * limit,
        Some(dt) if dt > 0.0 && dt <= limit => dt,
        Some(dt) => return Err(Error::Cfl { dt, limit }),
    };
    let path_dt = beta.dt();
    let substeps = (path_dt / target - 1e-9).ceil().max(1.0) as usize;
    let dt = path_dt / substeps as f64;

    let mut phi = match terminal {
        Terminal::Formula => terminal_condition(op.grid(), params)?.phi,
        Terminal::Given(v) => {
            if v.len() != op.grid.len() {
                return Err(Error::GridMismatch(format!("terminal has {} nodes, grid {}", v.len(), op.grid.len())));
            }
            v
        }
        Terminal::StationaryTail => {
            let cfg = HjbConfig { dt: Some(dt), ..config.clone() };
            solve_stationary_with(&op, beta.last(), &cfg, terminal_condition(op.grid(), params)?.phi)?.value.phi
        }
    };
    op.constrain(&mut phi);
    let mut next = vec![0.0; phi.len()];
    let samples = beta.len();
    let mut policies = vec![PolicyGrid::constant(op.grid, 0); samples];
    let mut values = Vec::new();
    let last_t = beta.t_end();
    policies[samples - 1] = op.policy(&phi, beta.last(), last_t);
    if keep_values {
        values.push(ValueGrid { grid: op.grid, t: last_t, phi: phi.clone() });
    }
    let mut max_correction: f64 = 0.0;
    for k in (0..samples - 1).rev() {
        for sub in (0..substeps).rev() {
            let t = k as f64 * path_dt + (sub + 1) as f64 * dt;
            let (inc, correction) = op.step(&phi, &mut next, beta.at(t), dt);
            if !inc.is_finite() {
                return Err(Error::NotStationary { t_end: t, residual: inc });
            }
            max_correction = max_correction.max(correction);
            std::mem::swap(&mut phi, &mut next);
        }
        let t = k as f64 * path_dt;
        policies[k] = op.policy(&phi, beta.values()[k], t);
        if keep_values {
            values.push(ValueGrid { grid: op.grid, t, phi: phi.clone() });
        }
    }
    values.reverse();
    Ok(HjbSolution {
        dt,
        schedule: PolicySchedule { path_dt, policies },
        values,
        value0: ValueGrid { grid: op.grid, t: 0.0, phi },
        max_boundary_correction: max_correction,
    })
}

/// `max |phi(0, a) - (a phi_a + (1 - a) phi_r)|` over the `s = 0` edge.
pub fn boundary_residual(value: &ValueGrid, params: &ModelParams) -> Result<f64> {
    edge_column_residual(value, params, 0)
}

/// Same quantity one column in, at `s = h`: how far the interior solution is
/// from the edge values as the edge is approached.
pub fn boundary_trace_residual(value: &ValueGrid, params: &ModelParams) -> Result<f64> {
    edge_column_residual(value, params, 1)
}

fn edge_column_residual(value: &ValueGrid, params: &ModelParams, i: usize) -> Result<f64> {
    let phi_a = phi_bar_a(params)?;
    let g = value.grid;
    Ok((0..=g.n() - i)
        .map(|j| {
            let a = j as f64 * g.h();
            (value.phi[g.index(i, j)] - (a * phi_a + (1.0 - a) * params.phi_r)).abs()
        })
        .fold(0.0, f64::max))
}

/// `max |phi(s, a) - phi(s, r) - (a - r)(phi_a - phi_r)|` over node pairs
/// off the `s = 0` edge.
pub fn reflection_residual(value: &ValueGrid, params: &ModelParams) -> Result<f64> {
    let phi_a = phi_bar_a(params)?;
    let g = value.grid;
    Ok(g.nodes()
        .filter(|&(_, i, j)| i > 0 && i < g.n() && g.in_lower_half(i, j))
        .map(|(k, i, j)| {
            let (p, q) = g.mirror(i, j);
            let (s, a) = g.coords(i, j);
            let r = 1.0 - s - a;
            (value.phi[k] - value.phi[g.index(p, q)] - (a - r) * (phi_a - params.phi_r)).abs()
        })
        .fold(0.0, f64::max))
}

/// Connected same-valued regions smaller than `min_fraction` of the grid are
/// flipped. Returns the cleaned policy and the number of flipped nodes.
pub fn remove_islands(policy: &PolicyGrid, min_fraction: f64) -> (PolicyGrid, usize) {
    let g = policy.grid;
    let min_size = (min_fraction * g.len() as f64).ceil() as usize;
    let mut label = vec![usize::MAX; g.len()];
    let mut out = policy.clone();
    let mut flipped = 0;
    let mut queue = VecDeque::new();
    for (k, _, _) in g.nodes() {
        if label[k] != usize::MAX {
            continue;
        }
        let colour = policy.u[k];
        let mut members = vec![k];
        label[k] = k;
        queue.push_back(k);
        while let Some(c) = queue.pop_front() {
            let (i, j) = g.ij(c);
            for (p, q) in g.neighbours(i, j) {
                let m = g.index(p, q);
                if label[m] == usize::MAX && policy.u[m] == colour {
                    label[m] = k;
                    members.push(m);
                    queue.push_back(m);
                }
            }
        }
        if members.len() < min_size {
            for m in members {
                out.u[m] = 1 - colour;
                flipped += 1;
            }
        }
    }
    (out, flipped)
}

/// Fraction of grid nodes below which a connected policy region is treated
/// as a numerical artifact.
pub const ISLAND_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    /// `(s, a_thresh, switches)` per grid column.
    pub columns: Vec<(f64, f64, usize)>,
    /// Threshold along the `s + a = 1` edge.
    pub edge_threshold: f64,
    pub edge_switches: usize,
    /// Some column or the edge has more than one switch.
    pub non_threshold: bool,
    pub islands_flipped: usize,
}

fn scan(values: impl Iterator<Item = (f64, u8)>) -> (f64, usize) {
    let mut first_zero = None;
    let mut switches = 0;
    let mut prev = None;
    for (a, u) in values {
        if u == 0 && first_zero.is_none() {
            first_zero = Some(a);
        }
        if let Some(p) = prev {
            if p != u {
                switches += 1;
            }
        }
        prev = Some(u);
    }
    (first_zero.unwrap_or(1.0), switches)
}

/// Activity threshold in `a` per column after island removal.
pub fn extract_threshold(policy: &PolicyGrid) -> ThresholdSummary {
    let (clean, flipped) = remove_islands(policy, ISLAND_FRACTION);
    let g = clean.grid;
    let h = g.h();
    let columns: Vec<(f64, f64, usize)> = (0..=g.n())
        .map(|i| {
            let (thresh, switches) = scan((0..=g.n() - i).map(|j| (j as f64 * h, clean.u[g.index(i, j)])));
            (i as f64 * h, thresh, switches)
        })
        .collect();
    let (edge_threshold, edge_switches) = scan((0..=g.n()).map(|j| (j as f64 * h, clean.u[g.index(g.n() - j, j)])));
    let non_threshold = edge_switches > 1 || columns.iter().any(|c| c.2 > 1);
    if non_threshold {
        log::warn!("policy is not of threshold type after island removal");
    }
    ThresholdSummary { columns, edge_threshold, edge_switches, non_threshold, islands_flipped: flipped }
}

pub fn write_policy_csv(path: impl AsRef<Path>, value: &ValueGrid, policy: &PolicyGrid) -> Result<()> {
    let g = value.grid;
    if policy.grid != g {
        return Err(Error::GridMismatch("value and policy grids differ".into()));
    }
    let rows = g.nodes().map(|(k, i, j)| {
        let (s, a) = g.coords(i, j);
        [s, a, value.phi[k], f64::from(policy.u[k])]
    });
    write_csv(path, &["s", "a", "phi", "u"], rows)
}

pub fn write_threshold_csv(path: impl AsRef<Path>, summary: &ThresholdSummary) -> Result<()> {
    write_csv(path, &["s", "a_thresh"], summary.columns.iter().map(|c| [c.0, c.1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbMetadata {
    pub n: usize,
    pub dt: f64,
    pub beta: f64,
    pub steps: usize,
    pub elapsed: f64,
    pub last_increment: f64,
    pub boundary_residual: f64,
    pub boundary_trace_residual: f64,
    pub reflection_residual: f64,
    pub edge_threshold: f64,
    pub edge_switches: usize,
    pub active_area: f64,
}

impl HjbMetadata {
    pub fn from_solution(sol: &StationarySolution, params: &ModelParams) -> Result<Self> {
        let summary = extract_threshold(&sol.policy);
        Ok(Self {
            n: sol.value.grid.n(),
            dt: sol.dt,
            beta: sol.beta,
            steps: sol.steps,
            elapsed: sol.elapsed,
            last_increment: sol.last_increment,
            boundary_residual: boundary_residual(&sol.value, params)?.max(sol.boundary_correction),
            boundary_trace_residual: boundary_trace_residual(&sol.value, params)?,
            reflection_residual: reflection_residual(&sol.value, params)?,
            edge_threshold: summary.edge_threshold,
            edge_switches: summary.edge_switches,
            active_area: sol.policy.active_area(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}
