//! Belief filter of an agent before symptom onset.
//!
//! Until the agent shows symptoms it only knows that it is in S, A or R. The
//! conditional law `(S_t, A_t, R_t)` evolves deterministically; the absence
//! of symptoms pushes mass away from A at rate `lambda_ai * A`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::model::ModelParams;
use crate::ode::rk4_step;
use crate::path::MeanFieldPath;

pub const DEFAULT_DT: f64 = 0.01;

/// Renormalize once the simplex drift exceeds this.
const DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub s: f64,
    pub a: f64,
    pub r: f64,
}

impl Belief {
    pub fn new(s: f64, a: f64, r: f64) -> Result<Self> {
        let b = Self { s, a, r };
        if [s, a, r].iter().any(|x| !x.is_finite() || *x < -1e-12) || (s + a + r - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("belief", format!("({s}, {a}, {r}) is not on the simplex")));
        }
        Ok(b.projected())
    }

    /// Belief with `r = 1 - s - a`.
    pub fn from_sa(s: f64, a: f64) -> Result<Self> {
        Self::new(s, a, 1.0 - s - a)
    }

    pub fn susceptible() -> Self {
        Self { s: 1.0, a: 0.0, r: 0.0 }
    }

    fn to_array(self) -> [f64; 3] {
        [self.s, self.a, self.r]
    }

    pub fn drift(&self) -> f64 {
        (self.s + self.a + self.r - 1.0).abs()
    }

    /// Clamps negatives to zero and rescales onto the simplex.
    pub fn projected(&self) -> Self {
        let s = self.s.max(0.0);
        let a = self.a.max(0.0);
        let r = self.r.max(0.0);
        let total = s + a + r;
        Self { s: s / total, a: a / total, r: r / total }
    }
}

/// Time derivative `(dS, dA, dR)` of the filter. The components sum to
/// `lambda_ai * A * (S + A + R - 1)`, which vanishes on the simplex.
pub fn filter_rhs(b: &Belief, u: f64, beta: f64, params: &ModelParams) -> [f64; 3] {
    rhs_array(&b.to_array(), u, beta, params)
}

fn rhs_array(y: &[f64; 3], u: f64, beta: f64, params: &ModelParams) -> [f64; 3] {
    let [s, a, r] = *y;
    let infect = params.lambda_sa * beta * u + params.eta;
    [
        (-infect + a * params.lambda_ai) * s,
        infect * s + a * (-params.lambda_ai - params.lambda_ar + params.lambda_ai * a),
        a * (params.lambda_ar + params.lambda_ai * r),
    ]
}

/// Invariant upper barrier `(lambda_sa * beta_bar + eta) / lambda_ai` for the
/// asymptomatic belief of an always active agent.
pub fn a_bar(beta_bar: f64, params: &ModelParams) -> Result<f64> {
    if params.lambda_ai <= 0.0 {
        return Err(Error::Degenerate("a_bar"));
    }
    Ok((params.lambda_sa * beta_bar + params.eta) / params.lambda_ai)
}

/// `dA/dt` at `A = a_bar` for a constant `beta_bar` and `u = 1`, written as a
/// function of `S` alone.
pub fn barrier_derivative(s: f64, beta_bar: f64, params: &ModelParams) -> f64 {
    let infect = params.lambda_sa * beta_bar + params.eta;
    infect * (s - 1.0 + (infect - params.lambda_ar) / params.lambda_ai)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrajectory {
    pub dt: f64,
    pub beliefs: Vec<Belief>,
    /// Control applied on `[t_k, t_k + dt)`.
    pub u: Vec<f64>,
    /// Barrier for the largest `beta` sample of the driving path.
    pub a_bar: Option<f64>,
    pub sup_a: f64,
    pub renormalizations: usize,
}

impl FilterTrajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.beliefs.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn last(&self) -> Belief {
        *self.beliefs.last().unwrap()
    }

    /// Belief at `t` by linear interpolation; constant beyond the horizon.
    pub fn at(&self, t: f64) -> Belief {
        if t <= 0.0 {
            return self.beliefs[0];
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.beliefs.len() {
            return self.last();
        }
        let w = x - k as f64;
        let (p, q) = (self.beliefs[k], self.beliefs[k + 1]);
        Belief { s: (1.0 - w) * p.s + w * q.s, a: (1.0 - w) * p.a + w * q.a, r: (1.0 - w) * p.r + w * q.r }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let a_bar = self.a_bar.unwrap_or(f64::NAN);
        let rows = self.times().zip(&self.beliefs).zip(&self.u).map(|((t, b), u)| [t, b.s, b.a, b.r, *u, a_bar]);
        write_csv(path, &["t", "S", "A", "R", "u", "a_bar"], rows)
    }
}

/// RK4 integration of the filter on `[0, horizon]`. `control(t, belief)` is
/// evaluated at the start of each step and held for the step.
pub fn integrate_filter(
    b0: Belief,
    control: impl Fn(f64, &Belief) -> f64,
    beta: &MeanFieldPath,
    dt: f64,
    horizon: f64,
    params: &ModelParams,
) -> Result<FilterTrajectory> {
    if !(dt > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("dt/horizon", format!("need dt > 0, horizon >= 0, got {dt}, {horizon}")));
    }
    let b0 = Belief::new(b0.s, b0.a, b0.r)?;
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { dt } else { horizon / steps as f64 };

    let mut beliefs = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    beliefs.push(b0);
    let mut current = b0;
    let mut sup_a = b0.a;
    let mut renormalizations = 0;
    for step in 0..steps {
        let t = step as f64 * dt;
        let u = control(t, &current);
        controls.push(u);
        let y = rk4_step(|t, y| rhs_array(y, u, beta.at(t), params), t, &current.to_array(), dt);
        if y.iter().any(|v| !v.is_finite() || v.abs() > 2.0) {
            return Err(Error::FilterBlowUp { step });
        }
        let mut next = Belief { s: y[0], a: y[1], r: y[2] };
        if next.drift() > DRIFT_TOL || y.iter().any(|v| *v < 0.0) {
            next = next.projected();
            renormalizations += 1;
        }
        sup_a = sup_a.max(next.a);
        beliefs.push(next);
        current = next;
    }
    controls.push(control(steps as f64 * dt, &current));
    if renormalizations > 0 {
        log::debug!("filter renormalized {renormalizations} times over {steps} steps");
    }
    let a_bar = if params.lambda_ai > 0.0 { Some(a_bar(beta.max(), params)?) } else { None };
    Ok(FilterTrajectory { dt, beliefs, u: controls, a_bar, sup_a, renormalizations })
}
