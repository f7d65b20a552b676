//! Forward transport of the population belief density.
//!
//! The density is stored as node masses on a [`TriGrid`]; `p = m / w` with
//! the lumped quadrature weights `w`. Transport uses the adjoint of the jump
//! stencil of the value solver, so every step is conservative and keeps
//! masses nonnegative whenever the value solver's step is stable. Symptom
//! onset removes mass at rate `a lambda_ai`, applied exactly over a step; the
//! removed mass feeds the symptomatic branch `I -> {R, D}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{drift_stencil, Stencil, TriGrid};
use crate::hjb::{PolicyGrid, PolicySchedule};
use crate::io::write_csv;
use crate::model::ModelParams;
use crate::path::MeanFieldPath;

/// Masses below this are treated as rounding noise.
const NEGATIVE_TOL: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefDensity {
    pub grid: TriGrid,
    /// Node masses; they sum to the probability of not yet having shown
    /// symptoms.
    pub mass: Vec<f64>,
    pub rho_i: f64,
    /// Recovered after symptoms.
    pub rho_r_post: f64,
    pub rho_d: f64,
}

impl BeliefDensity {
    pub fn empty(grid: TriGrid) -> Self {
        Self { grid, mass: vec![0.0; grid.len()], rho_i: 0.0, rho_r_post: 0.0, rho_d: 0.0 }
    }

    /// Builds node masses from a density function `p(s, a)`; the density is
    /// not renormalized.
    pub fn from_density_fn(grid: TriGrid, p: impl Fn(f64, f64) -> f64) -> Self {
        let w = grid.weights();
        let mass = grid
            .nodes()
            .map(|(k, i, j)| {
                let (s, a) = grid.coords(i, j);
                w[k] * p(s, a)
            })
            .collect();
        Self { mass, ..Self::empty(grid) }
    }

    /// Truncated Gaussian bump of unit mass, zero on the triangle's edges.
    pub fn gaussian_bump(grid: TriGrid, center: (f64, f64), width: f64) -> Result<Self> {
        let mut d = Self::from_density_fn(grid, |s, a| {
            let ds = s - center.0;
            let da = a - center.1;
            (-(ds * ds + da * da) / (2.0 * width * width)).exp()
        });
        for (k, i, j) in grid.nodes() {
            if grid.is_boundary(i, j) {
                d.mass[k] = 0.0;
            }
        }
        let total = d.triangle_mass();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("bump", "no interior node carries mass; refine the grid or widen the bump"));
        }
        for m in &mut d.mass {
            *m /= total;
        }
        Ok(d)
    }

    /// Bump used by default for an initially susceptible population.
    pub fn default_initial(grid: TriGrid) -> Result<Self> {
        Self::gaussian_bump(grid, (0.98, 0.01), 0.02)
    }

    pub fn density(&self) -> Vec<f64> {
        self.grid.weights().iter().zip(&self.mass).map(|(w, m)| m / w).collect()
    }

    pub fn triangle_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.triangle_mass() + self.rho_i + self.rho_r_post + self.rho_d
    }

    /// Recovered agents who do not know it: the `r` part of every belief.
    pub fn rho_r_internal(&self) -> f64 {
        self.grid
            .nodes()
            .map(|(k, i, j)| {
                let (s, a) = self.grid.coords(i, j);
                (1.0 - s - a).max(0.0) * self.mass[k]
            })
            .sum()
    }

    pub fn rho_r_total(&self) -> f64 {
        self.rho_r_internal() + self.rho_r_post
    }

    /// Mean `(s, a)` of the belief mass still in the triangle.
    pub fn conditional_mean(&self) -> Option<(f64, f64)> {
        let total = self.triangle_mass();
        if total <= 0.0 {
            return None;
        }
        let (mut s_sum, mut a_sum) = (0.0, 0.0);
        for (k, i, j) in self.grid.nodes() {
            let (s, a) = self.grid.coords(i, j);
            s_sum += s * self.mass[k];
            a_sum += a * self.mass[k];
        }
        Some((s_sum / total, a_sum / total))
    }

    /// Mass on the `a = 0` and `s + a = 1` edges.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.grid.n();
        self.grid.nodes().filter(|&(_, i, j)| j == 0 || i + j == n).map(|(k, _, _)| self.mass[k]).sum()
    }
}

/// `rho_a = int a p`: probability of being asymptomatic.
pub fn asymptomatic_mass(density: &BeliefDensity) -> f64 {
    density.grid.nodes().map(|(k, _, j)| j as f64 * density.grid.h() * density.mass[k]).sum()
}

/// Activity-weighted asymptomatic mass `int a u p`.
pub fn active_asymptomatic_mass(density: &BeliefDensity, policy: &PolicyGrid) -> f64 {
    density.grid.nodes().map(|(k, _, j)| j as f64 * density.grid.h() * f64::from(policy.u[k]) * density.mass[k]).sum()
}

/// Time derivatives `(rho_i, rho_r_post, rho_d)` of the symptomatic branch.
pub fn symptomatic_rates(density: &BeliefDensity, params: &ModelParams) -> [f64; 3] {
    let inflow = params.lambda_ai * asymptomatic_mass(density);
    [
        inflow - (params.lambda_ir + params.lambda_id) * density.rho_i,
        params.lambda_ir * density.rho_i,
        params.lambda_id * density.rho_i,
    ]
}

/// Advances the branch masses by `dt`: `rho_i` decays exactly and its
/// outflow is split between R and D; `inflow` (mass that left the triangle
/// during the step) is then added to `rho_i`. Total mass is unchanged.
pub fn symptomatic_branch_step(density: &mut BeliefDensity, inflow: f64, dt: f64, params: &ModelParams) {
    let kappa = params.lambda_ir + params.lambda_id;
    if kappa > 0.0 {
        let out = density.rho_i * (1.0 - (-kappa * dt).exp());
        density.rho_i -= out;
        density.rho_r_post += out * params.lambda_ir / kappa;
        density.rho_d += out * params.lambda_id / kappa;
    }
    density.rho_i += inflow;
}

/// Precomputed transport coefficients.
#[derive(Debug, Clone)]
pub struct FpkSolver {
    grid: TriGrid,
    stencils: Vec<Stencil>,
    /// Node `(i - 1, j + 1)` and `lambda_sa s / h`.
    diag: Vec<(usize, f64)>,
    /// `a lambda_ai`.
    sink: Vec<f64>,
    scratch: Vec<f64>,
}

impl FpkSolver {
    pub fn new(grid: TriGrid, params: &ModelParams) -> Self {
        let h = grid.h();
        let mut stencils = Vec::with_capacity(grid.len());
        let mut diag = Vec::with_capacity(grid.len());
        let mut sink = Vec::with_capacity(grid.len());
        for (k, i, j) in grid.nodes() {
            let (s, a) = grid.coords(i, j);
            stencils.push(drift_stencil(&grid, i, j, params));
            diag.push(if i > 0 { (grid.index(i - 1, j + 1), params.lambda_sa * s / h) } else { (k, 0.0) });
            sink.push(a * params.lambda_ai);
        }
        Self { grid, stencils, diag, sink, scratch: vec![0.0; grid.len()] }
    }

    /// Largest step keeping the transport update positive.
    pub fn dt_limit(&self, beta_max: f64) -> f64 {
        let rate =
            (0..self.grid.len()).map(|k| self.stencils[k].total_rate() + beta_max * self.diag[k].1).fold(0.0, f64::max);
        1.0 / rate
    }

    /// One forward step of the density at activity level `beta` under
    /// `policy`, followed by the symptomatic branch update.
    pub fn step(
        &mut self,
        density: &mut BeliefDensity,
        policy: &PolicyGrid,
        beta: f64,
        dt: f64,
        params: &ModelParams,
    ) -> Result<()> {
        if policy.grid != self.grid || density.grid != self.grid {
            return Err(Error::GridMismatch("density, policy and solver grids differ".into()));
        }
        let limit = self.dt_limit(beta);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let next = &mut self.scratch;
        next.copy_from_slice(&density.mass);
        for k in 0..self.grid.len() {
            let m = density.mass[k];
            if m == 0.0 {
                continue;
            }
            for (t, rate) in self.stencils[k].iter() {
                let flow = dt * rate * m;
                next[k] -= flow;
                next[t] += flow;
            }
            if policy.u[k] == 1 {
                let (t, c) = self.diag[k];
                let flow = dt * beta * c * m;
                next[k] -= flow;
                next[t] += flow;
            }
        }
        let mut removed = 0.0;
        for (k, m) in next.iter_mut().enumerate() {
            if *m < 0.0 {
                if *m < NEGATIVE_TOL {
                    return Err(Error::NegativeDensity { node: k, value: *m });
                }
                *m = 0.0;
            }
            let kept = *m * (-self.sink[k] * dt).exp();
            removed += *m - kept;
            *m = kept;
        }
        density.mass.copy_from_slice(next);
        symptomatic_branch_step(density, removed, dt, params);
        Ok(())
    }
}

/// One forward step with a freshly built solver.
pub fn fpk_step(
    density: &BeliefDensity,
    policy: &PolicyGrid,
    beta: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<BeliefDensity> {
    let mut solver = FpkSolver::new(density.grid, params);
    let mut out = density.clone();
    solver.step(&mut out, policy, beta, dt, params)?;
    Ok(out)
}

/// One row of the scalar time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpkSample {
    pub t: f64,
    pub mass_triangle: f64,
    pub rho_a: f64,
    pub rho_i: f64,
    pub rho_r_total: f64,
    pub rho_d: f64,
    /// Activity-weighted asymptomatic mass produced by this population.
    pub beta: f64,
    /// Conditional mean belief of the mass in the triangle; NaN once it is
    /// empty.
    pub mean_s: f64,
    pub mean_a: f64,
}

impl FpkSample {
    fn of(t: f64, density: &BeliefDensity, policy: &PolicyGrid) -> Self {
        let mean = density.conditional_mean().unwrap_or((f64::NAN, f64::NAN));
        Self {
            t,
            mass_triangle: density.triangle_mass(),
            rho_a: asymptomatic_mass(density),
            rho_i: density.rho_i,
            rho_r_total: density.rho_r_total(),
            rho_d: density.rho_d,
            beta: active_asymptomatic_mass(density, policy),
            mean_s: mean.0,
            mean_a: mean.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FpkRun {
    pub dt: f64,
    /// Samples at every multiple of the recording interval.
    pub series: Vec<FpkSample>,
    /// Densities at the requested slice times.
    pub slices: Vec<(f64, BeliefDensity)>,
    pub last: BeliefDensity,
    /// Largest `|total mass - 1|` seen.
    pub max_mass_defect: f64,
    pub max_boundary_mass: f64,
}

/// Forward propagation on `[0, horizon]` with step `dt` (shrunk so that
/// `record_every` is a whole number of steps). The policy in force at `t` is
/// `schedule.at(t)`; `beta` is read at the start of every step.
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    initial: &BeliefDensity,
    schedule: &PolicySchedule,
    beta: &MeanFieldPath,
    dt: f64,
    horizon: f64,
    record_every: f64,
    slice_times: &[f64],
    params: &ModelParams,
) -> Result<FpkRun> {
    if !(dt > 0.0) || !(record_every > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("dt/record_every", "must be positive"));
    }
    let mut solver = FpkSolver::new(initial.grid, params);
    let substeps = (record_every / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = record_every / substeps as f64;
    let records = (horizon / record_every - 1e-9).ceil().max(0.0) as usize;
    let initial_total = initial.total_mass();

    let mut density = initial.clone();
    let mut series = Vec::with_capacity(records + 1);
    let mut slices = Vec::new();
    let mut pending_slices: Vec<f64> = slice_times.to_vec();
    pending_slices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut pending = pending_slices.into_iter().peekable();
    let mut max_defect: f64 = 0.0;
    let mut max_boundary: f64 = density.boundary_mass();
    series.push(FpkSample::of(0.0, &density, schedule.at(0.0)));
    while pending.peek().is_some_and(|&t| t <= 0.5 * dt) {
        slices.push((pending.next().unwrap(), density.clone()));
    }
    for r in 0..records {
        for sub in 0..substeps {
            let t = (r * substeps + sub) as f64 * dt;
            solver.step(&mut density, schedule.at(t), beta.at(t), dt, params)?;
            let t_next = t + dt;
            while pending.peek().is_some_and(|&ts| ts <= t_next + 0.5 * dt) {
                slices.push((pending.next().unwrap(), density.clone()));
            }
        }
        let t = (r + 1) as f64 * record_every;
        let defect = (density.total_mass() - initial_total).abs();
        max_defect = max_defect.max(defect);
        max_boundary = max_boundary.max(density.boundary_mass());
        if defect > 1e-6 * t.max(1.0) {
            return Err(Error::MassViolation { t, detail: format!("total mass drifted by {defect:e}") });
        }
        series.push(FpkSample::of(t, &density, schedule.at(t)));
    }
    Ok(FpkRun { dt, series, slices, last: density, max_mass_defect: max_defect, max_boundary_mass: max_boundary })
}

/// `s, a, p` per node.
pub fn write_slice_csv(path: impl AsRef<Path>, density: &BeliefDensity) -> Result<()> {
    let g = density.grid;
    let p = density.density();
    let rows = g.nodes().map(|(k, i, j)| {
        let (s, a) = g.coords(i, j);
        [s, a, p[k]]
    });
    write_csv(path, &["s", "a", "p"], rows)
}

/// `t, mass_triangle, rho_a, rho_i, rho_r_total, rho_d, beta, mean_s, mean_a`.
pub fn write_series_csv(path: impl AsRef<Path>, series: &[FpkSample]) -> Result<()> {
    let rows = series
        .iter()
        .map(|r| [r.t, r.mass_triangle, r.rho_a, r.rho_i, r.rho_r_total, r.rho_d, r.beta, r.mean_s, r.mean_a]);
    write_csv(path, &["t", "mass_triangle", "rho_a", "rho_i", "rho_r_total", "rho_d", "beta", "mean_s", "mean_a"], rows)
}
