//! Exact-event Monte Carlo simulation of individual agents.
//!
//! Every agent draws from its own ChaCha stream, selected by the agent index,
//! so results do not depend on how agents are scheduled across threads. The
//! S -> A hazard `eta + lambda_sa beta_t u_t` varies in time and is sampled by
//! thinning; all other holding times are exponential.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{integrate_filter, Belief};
use crate::fully_observed::{ControlSchedule, FullyObservedPolicy};
use crate::hjb::PolicyGrid;
use crate::io::write_csv;
use crate::model::{EpiState, ModelParams};
use crate::path::MeanFieldPath;

/// Default truncation horizon of a simulated path.
pub const T_SIM: f64 = 2000.0;

/// Activity of an agent as a function of its true state and time.
///
/// A partially observed agent acts on its belief, which before symptom onset
/// is the same deterministic function of time in S, A and R; the schedules
/// for S and A then coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy {
    pub s: ControlSchedule,
    pub a: ControlSchedule,
    pub i: u8,
}

impl AgentPolicy {
    pub fn fully_observed(policy: &FullyObservedPolicy, gamma: f64) -> Self {
        Self { s: policy.s.clone(), a: ControlSchedule::constant(policy.a, gamma), i: policy.i }
    }

    /// Constant activity `u` before symptoms, isolation after.
    pub fn pre_symptom_constant(u: u8, gamma: f64) -> Self {
        Self { s: ControlSchedule::constant(u, gamma), a: ControlSchedule::constant(u, gamma), i: 0 }
    }

    /// Belief-feedback policy before symptoms, isolation after.
    pub fn from_schedule(pre: ControlSchedule) -> Self {
        Self { a: pre.clone(), s: pre, i: 0 }
    }

    /// Runs the agent's filter from `b0` under the belief-feedback policy
    /// `u(s, a)` and records the resulting activity schedule.
    pub fn from_belief_feedback(
        b0: Belief,
        policy: impl Fn(f64, f64) -> u8,
        beta: &MeanFieldPath,
        dt: f64,
        horizon: f64,
        params: &ModelParams,
    ) -> Result<Self> {
        let traj = integrate_filter(b0, |_, b| f64::from(policy(b.s, b.a)), beta, dt, horizon, params)?;
        let u = traj.u.iter().map(|&u| u as u8).collect();
        Ok(Self::from_schedule(ControlSchedule::new(traj.dt, u, params.gamma)?))
    }

    /// Same as [`AgentPolicy::from_belief_feedback`] with a grid policy.
    pub fn from_policy_grid(
        b0: Belief,
        policy: &PolicyGrid,
        beta: &MeanFieldPath,
        dt: f64,
        horizon: f64,
        params: &ModelParams,
    ) -> Result<Self> {
        Self::from_belief_feedback(b0, |s, a| policy.at(s, a), beta, dt, horizon, params)
    }

    pub fn at(&self, x: EpiState, t: f64) -> u8 {
        match x {
            EpiState::S => self.s.at(t),
            EpiState::A => self.a.at(t),
            EpiState::I => self.i,
            EpiState::R | EpiState::D => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub theta: usize,
    /// `(time, state entered)`, starting with the initial state at `t = 0`.
    pub jumps: Vec<(f64, EpiState)>,
    /// Symptom onset.
    pub tau: Option<f64>,
    /// First hit of R or D.
    pub t_stop: Option<f64>,
    /// Realized discounted cost including the terminal value.
    pub cost: f64,
    /// The path reached the simulation horizon before stopping.
    pub truncated: bool,
}

impl AgentRecord {
    pub fn state_at(&self, t: f64) -> EpiState {
        let k = self.jumps.partition_point(|(tj, _)| *tj <= t);
        self.jumps[k.saturating_sub(1)].1
    }
}

/// Per-agent random stream.
pub fn agent_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let e: f64 = Exp1.sample(rng);
    e / rate
}

fn discount(gamma: f64, t0: f64, t1: f64) -> f64 {
    ((-gamma * t0).exp() - (-gamma * t1).exp()) / gamma
}

/// Draws a state from a pmf over `(S, A, I, R, D)`.
fn sample_state(rng: &mut ChaCha8Rng, pmf: &[f64; 5]) -> EpiState {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        acc += p;
        if x < acc {
            return EpiState::ALL[k];
        }
    }
    EpiState::ALL[pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0)]
}

/// Simulates one agent from `x0` until it stops or reaches `t_sim`.
pub fn simulate_agent_with(
    policy: &AgentPolicy,
    beta: &MeanFieldPath,
    params: &ModelParams,
    x0: EpiState,
    t_sim: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AgentRecord> {
    let g = params.gamma;
    let mut jumps = vec![(0.0, x0)];
    let mut state = x0;
    let mut t = 0.0;
    let mut cost = 0.0;
    let mut tau = if x0 == EpiState::I { Some(0.0) } else { None };
    let slope = params.c_a - params.alpha;
    loop {
        match state {
            EpiState::R | EpiState::D => {
                let terminal = if state == EpiState::R { params.phi_r } else { params.phi_d };
                cost += (-g * t).exp() * terminal;
                return Ok(AgentRecord { theta: 0, jumps, tau, t_stop: Some(t), cost, truncated: false });
            }
            EpiState::S => {
                let majorant = params.eta + params.lambda_sa * beta.max_from(t);
                let mut candidate = t;
                let next = loop {
                    candidate += exp_sample(rng, majorant);
                    if candidate >= t_sim {
                        break None;
                    }
                    let hazard = params.eta + params.lambda_sa * beta.at(candidate) * f64::from(policy.s.at(candidate));
                    if hazard > majorant * (1.0 + 1e-12) {
                        return Err(Error::invalid("thinning", format!("hazard {hazard} exceeds majorant {majorant}")));
                    }
                    let x: f64 = rng.gen();
                    if x * majorant < hazard {
                        break Some(candidate);
                    }
                };
                let end = next.unwrap_or(t_sim);
                cost -= params.alpha * policy.s.discounted_active(t, end);
                match next {
                    Some(tn) => {
                        t = tn;
                        state = EpiState::A;
                        jumps.push((t, state));
                    }
                    None => break,
                }
            }
            EpiState::A => {
                let hold = exp_sample(rng, params.lambda_ai + params.lambda_ar);
                let end = (t + hold).min(t_sim);
                cost += params.c_h_a * discount(g, t, end) + slope * policy.a.discounted_active(t, end);
                if t + hold >= t_sim {
                    break;
                }
                t += hold;
                let x: f64 = rng.gen();
                state = if x * (params.lambda_ai + params.lambda_ar) < params.lambda_ai {
                    tau = Some(t);
                    EpiState::I
                } else {
                    EpiState::R
                };
                jumps.push((t, state));
            }
            EpiState::I => {
                let hold = exp_sample(rng, params.lambda_ir + params.lambda_id);
                let end = (t + hold).min(t_sim);
                cost += (params.c_h_i + slope * f64::from(policy.i)) * discount(g, t, end);
                if t + hold >= t_sim {
                    break;
                }
                t += hold;
                let x: f64 = rng.gen();
                state = if x * (params.lambda_ir + params.lambda_id) < params.lambda_ir {
                    EpiState::R
                } else {
                    EpiState::D
                };
                jumps.push((t, state));
            }
        }
    }
    Ok(AgentRecord { theta: 0, jumps, tau, t_stop: None, cost, truncated: true })
}

/// Simulates agent `index` of the stream family `seed`.
pub fn simulate_agent(
    policy: &AgentPolicy,
    beta: &MeanFieldPath,
    params: &ModelParams,
    x0: EpiState,
    seed: u64,
    index: u64,
) -> Result<AgentRecord> {
    let mut rng = agent_rng(seed, index);
    simulate_agent_with(policy, beta, params, x0, T_SIM, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Bound on the discounted cost beyond the simulation horizon.
    pub tail_bound: f64,
}

/// Monte Carlo estimate of the expected discounted cost from `x0`.
pub fn estimate_objective(
    policy: &AgentPolicy,
    beta: &MeanFieldPath,
    params: &ModelParams,
    x0: EpiState,
    n: usize,
    seed: u64,
) -> Result<ObjectiveEstimate> {
    if n < 1000 {
        return Err(Error::invalid("n", "need at least 1000 agents"));
    }
    let costs = (0..n as u64)
        .into_par_iter()
        .map(|k| simulate_agent(policy, beta, params, x0, seed, k).map(|r| r.cost))
        .collect::<Result<Vec<f64>>>()?;
    let mean = costs.iter().sum::<f64>() / n as f64;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let running = params.c_h_i + (params.c_a + params.alpha).abs();
    let terminal = params.phi_r.abs().max(params.phi_d.abs());
    let tail_bound = (-params.gamma * T_SIM).exp() * (terminal + running / params.gamma);
    Ok(ObjectiveEstimate { mean, stderr: (var / n as f64).sqrt(), n, tail_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feedback {
    /// Agents are exposed to a given `beta` path.
    OpenLoop,
    /// `beta` is re-estimated from the ensemble at the start of every bin.
    ClosedLoop,
}

/// One attribute class of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleClass {
    pub prob: f64,
    pub params: ModelParams,
    pub policy: AgentPolicy,
    /// Initial pmf over `(S, A, I, R, D)`.
    pub initial: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub dt: f64,
    pub n: usize,
    /// Agents per state at `t_k`; every row sums to `n`.
    pub counts: Vec<[u64; 5]>,
    /// Fractions in `(S, A, I, R, D)` at `t_k = k dt`.
    pub fractions: Vec<[f64; 5]>,
    /// Activity-weighted infected fraction.
    pub beta_hat: Vec<f64>,
    /// 95% binomial half-widths of the fractions.
    pub half_widths: Vec<[f64; 5]>,
}

impl EnsembleStats {
    fn from_counts(dt: f64, n: usize, counts: &[[u64; 5]], active: &[u64]) -> Self {
        let nf = n as f64;
        let fractions: Vec<[f64; 5]> = counts.iter().map(|c| c.map(|x| x as f64 / nf)).collect();
        let half_widths = fractions.iter().map(|f| f.map(|p| 1.96 * (p * (1.0 - p) / nf).sqrt())).collect();
        Self {
            dt,
            n,
            counts: counts.to_vec(),
            fractions,
            beta_hat: active.iter().map(|&a| a as f64 / nf).collect(),
            half_widths,
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.fractions.len()).map(move |k| k as f64 * self.dt)
    }

    /// `t, frac_s, frac_a, frac_i, frac_r, frac_d, beta_hat`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self
            .times()
            .zip(&self.fractions)
            .zip(&self.beta_hat)
            .map(|((t, f), b)| [t, f[0], f[1], f[2], f[3], f[4], *b]);
        write_csv(path, &["t", "frac_s", "frac_a", "frac_i", "frac_r", "frac_d", "beta_hat"], rows)
    }
}

fn pick_class(rng: &mut ChaCha8Rng, classes: &[EnsembleClass]) -> usize {
    if classes.len() == 1 {
        return 0;
    }
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, c) in classes.iter().enumerate() {
        acc += c.prob;
        if x < acc {
            return k;
        }
    }
    classes.len() - 1
}

/// Simulates `n` agents on `[0, horizon]` and records state fractions every
/// `dt`. In open-loop mode `beta` drives every agent and the records are also
/// returned; in closed-loop mode `beta` only supplies the first bin.
pub fn ensemble_run(
    classes: &[EnsembleClass],
    beta: &MeanFieldPath,
    n: usize,
    seed: u64,
    dt: f64,
    horizon: f64,
    feedback: Feedback,
) -> Result<(EnsembleStats, Vec<AgentRecord>)> {
    if classes.is_empty() || n == 0 {
        return Err(Error::invalid("ensemble", "needs at least one class and one agent"));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("dt/horizon", "need dt > 0 and horizon >= 0"));
    }
    let bins = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    match feedback {
        Feedback::OpenLoop => {
            let records = (0..n as u64)
                .into_par_iter()
                .map(|k| {
                    let mut rng = agent_rng(seed, k);
                    let theta = pick_class(&mut rng, classes);
                    let c = &classes[theta];
                    let x0 = sample_state(&mut rng, &c.initial);
                    let mut rec = simulate_agent_with(&c.policy, beta, &c.params, x0, horizon + dt, &mut rng)?;
                    rec.theta = theta;
                    Ok(rec)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut counts = vec![[0u64; 5]; bins + 1];
            let mut active = vec![0u64; bins + 1];
            for rec in &records {
                let policy = &classes[rec.theta].policy;
                for (k, (c, act)) in counts.iter_mut().zip(active.iter_mut()).enumerate() {
                    let t = k as f64 * dt;
                    let x = rec.state_at(t);
                    c[x.index()] += 1;
                    if x.is_infected() {
                        *act += u64::from(policy.at(x, t));
                    }
                }
            }
            Ok((EnsembleStats::from_counts(dt, n, &counts, &active), records))
        }
        Feedback::ClosedLoop => closed_loop(classes, beta, n, seed, dt, bins),
    }
}

fn closed_loop(
    classes: &[EnsembleClass],
    beta: &MeanFieldPath,
    n: usize,
    seed: u64,
    dt: f64,
    bins: usize,
) -> Result<(EnsembleStats, Vec<AgentRecord>)> {
    struct Agent {
        rng: ChaCha8Rng,
        theta: usize,
        state: EpiState,
        record: AgentRecord,
    }
    let mut agents: Vec<Agent> = (0..n as u64)
        .map(|k| {
            let mut rng = agent_rng(seed, k);
            let theta = pick_class(&mut rng, classes);
            let state = sample_state(&mut rng, &classes[theta].initial);
            let record = AgentRecord {
                theta,
                jumps: vec![(0.0, state)],
                tau: (state == EpiState::I).then_some(0.0),
                t_stop: state.is_terminal().then_some(0.0),
                cost: 0.0,
                truncated: false,
            };
            Agent { rng, theta, state, record }
        })
        .collect();
    let mut counts = vec![[0u64; 5]; bins + 1];
    let mut active = vec![0u64; bins + 1];
    let tally = |agents: &[Agent], t: f64, c: &mut [u64; 5], act: &mut u64| {
        for a in agents {
            c[a.state.index()] += 1;
            if a.state.is_infected() {
                *act += u64::from(classes[a.theta].policy.at(a.state, t));
            }
        }
    };
    tally(&agents, 0.0, &mut counts[0], &mut active[0]);
    let mut beta_bin = beta.at(0.0);
    for b in 0..bins {
        let t0 = b as f64 * dt;
        let t1 = t0 + dt;
        if b > 0 {
            beta_bin = active[b] as f64 / n as f64;
        }
        agents.par_iter_mut().for_each(|agent| {
            let c = &classes[agent.theta];
            let p = &c.params;
            let mut t = t0;
            loop {
                let rate = match agent.state {
                    EpiState::S => p.eta + p.lambda_sa * beta_bin * f64::from(c.policy.s.at(t)),
                    EpiState::A => p.lambda_ai + p.lambda_ar,
                    EpiState::I => p.lambda_ir + p.lambda_id,
                    EpiState::R | EpiState::D => break,
                };
                // The control schedule may switch inside the bin; restart at
                // the switch so the S hazard stays constant per draw.
                let horizon = if agent.state == EpiState::S {
                    let k = (t / c.policy.s.dt()).floor() + 1.0;
                    (k * c.policy.s.dt()).min(t1)
                } else {
                    t1
                };
                let hold = exp_sample(&mut agent.rng, rate);
                if t + hold >= horizon {
                    t = horizon;
                    if t >= t1 {
                        break;
                    }
                    continue;
                }
                t += hold;
                let x: f64 = agent.rng.gen();
                agent.state = match agent.state {
                    EpiState::S => EpiState::A,
                    EpiState::A => {
                        if x * (p.lambda_ai + p.lambda_ar) < p.lambda_ai {
                            agent.record.tau = Some(t);
                            EpiState::I
                        } else {
                            EpiState::R
                        }
                    }
                    EpiState::I => {
                        if x * (p.lambda_ir + p.lambda_id) < p.lambda_ir {
                            EpiState::R
                        } else {
                            EpiState::D
                        }
                    }
                    other => other,
                };
                agent.record.jumps.push((t, agent.state));
                if agent.state.is_terminal() {
                    agent.record.t_stop = Some(t);
                }
            }
        });
        let (c, act) = (&mut counts[b + 1], &mut active[b + 1]);
        tally(&agents, t1, c, act);
    }
    let stats = EnsembleStats::from_counts(dt, n, &counts, &active);
    Ok((stats, agents.into_iter().map(|a| a.record).collect()))
}

/// Writes one JSON object per agent and line.
pub fn write_event_log(path: impl AsRef<Path>, records: &[AgentRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_agent_without_baseline_never_leaves() {
        let p = ModelParams { eta: 0.0, ..ModelParams::default() };
        let beta = MeanFieldPath::constant(0.5, 1.0, 10.0).unwrap();
        let pol = AgentPolicy::pre_symptom_constant(0, p.gamma);
        let r = simulate_agent(&pol, &beta, &p, EpiState::S, 1, 0).unwrap();
        assert_eq!(r.jumps.len(), 1);
        assert!(r.tau.is_none() && r.t_stop.is_none() && r.truncated);
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn recovered_start_costs_terminal_value() {
        let p = ModelParams { phi_r: 0.25, ..ModelParams::default() };
        let beta = MeanFieldPath::constant(0.5, 1.0, 10.0).unwrap();
        let pol = AgentPolicy::pre_symptom_constant(1, p.gamma);
        let est = estimate_objective(&pol, &beta, &p, EpiState::R, 1000, 3).unwrap();
        assert_eq!(est.mean, 0.25);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn jumps_follow_the_transition_graph() {
        let p = ModelParams::default();
        let beta = MeanFieldPath::constant(0.3, 1.0, 100.0).unwrap();
        let pol = AgentPolicy::pre_symptom_constant(1, p.gamma);
        for k in 0..500 {
            let r = simulate_agent(&pol, &beta, &p, EpiState::S, 11, k).unwrap();
            for w in r.jumps.windows(2) {
                let ok = matches!(
                    (w[0].1, w[1].1),
                    (EpiState::S, EpiState::A)
                        | (EpiState::A, EpiState::I)
                        | (EpiState::A, EpiState::R)
                        | (EpiState::I, EpiState::R)
                        | (EpiState::I, EpiState::D)
                );
                assert!(ok, "{:?}", r.jumps);
                assert!(w[1].0 > w[0].0);
            }
        }
    }

    #[test]
    fn same_seed_same_record() {
        let p = ModelParams::default();
        let beta = MeanFieldPath::constant(0.2, 1.0, 100.0).unwrap();
        let pol = AgentPolicy::pre_symptom_constant(1, p.gamma);
        let a = simulate_agent(&pol, &beta, &p, EpiState::S, 5, 9).unwrap();
        let b = simulate_agent(&pol, &beta, &p, EpiState::S, 5, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_agent(&pol, &beta, &p, EpiState::S, 5, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_agent_ensemble_is_its_indicator_path() {
        let p = ModelParams::default();
        let beta = MeanFieldPath::constant(0.3, 1.0, 60.0).unwrap();
        let class = EnsembleClass {
            prob: 1.0,
            params: p.clone(),
            policy: AgentPolicy::pre_symptom_constant(1, p.gamma),
            initial: [1.0, 0.0, 0.0, 0.0, 0.0],
        };
        let (stats, recs) = ensemble_run(&[class], &beta, 1, 4, 0.5, 60.0, Feedback::OpenLoop).unwrap();
        for (k, f) in stats.fractions.iter().enumerate() {
            let x = recs[0].state_at(k as f64 * 0.5);
            let mut expected = [0.0; 5];
            expected[x.index()] = 1.0;
            assert_eq!(*f, expected);
        }
    }

    #[test]
    fn closed_loop_isolation_has_no_activity() {
        let p = ModelParams::default();
        let beta = MeanFieldPath::constant(0.0, 1.0, 50.0).unwrap();
        let class = EnsembleClass {
            prob: 1.0,
            params: p.clone(),
            policy: AgentPolicy::pre_symptom_constant(0, p.gamma),
            initial: [0.9, 0.1, 0.0, 0.0, 0.0],
        };
        let (stats, _) = ensemble_run(&[class], &beta, 2000, 8, 0.5, 50.0, Feedback::ClosedLoop).unwrap();
        assert!(stats.beta_hat.iter().all(|b| *b == 0.0));
        // Only the baseline rate infects: S decays like exp(-eta t).
        let s_end = stats.fractions.last().unwrap()[0];
        let expected = 0.9 * (-p.eta * 50.0f64).exp();
        assert!((s_end - expected).abs() < 4.0 * (expected * (1.0 - expected) / 2000.0).sqrt());
        for f in &stats.fractions {
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
