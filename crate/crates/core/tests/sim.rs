use epimfg_core::filter::{integrate_filter, Belief};
use epimfg_core::fpk::{asymptomatic_mass, propagate, BeliefDensity, FpkSolver};
use epimfg_core::fully_observed::{active_value, FullyObservedPolicy};
use epimfg_core::grid::TriGrid;
use epimfg_core::hjb::{PolicyGrid, PolicySchedule};
use epimfg_core::sim::{
    ensemble_run, estimate_objective, simulate_agent, write_event_log, AgentPolicy, EnsembleClass, Feedback,
};
use epimfg_core::{phi_bar_a, phi_bar_i, EpiState, MeanFieldPath, ModelParams};
use rayon::prelude::*;

fn records_from(x0: EpiState, beta: f64, n: u64, seed: u64) -> Vec<epimfg_core::sim::AgentRecord> {
    let p = ModelParams::default();
    let path = MeanFieldPath::constant(beta, 1.0, 100.0).unwrap();
    let pol = AgentPolicy::pre_symptom_constant(1, p.gamma);
    (0..n).into_par_iter().map(|k| simulate_agent(&pol, &path, &p, x0, seed, k).unwrap()).collect()
}

#[test]
fn holding_time_in_a_and_branching() {
    let recs = records_from(EpiState::A, 0.0, 100_000, 17);
    let n = recs.len() as f64;
    let mean_hold = recs.iter().map(|r| r.jumps[1].0).sum::<f64>() / n;
    let to_i = recs.iter().filter(|r| r.jumps[1].1 == EpiState::I).count() as f64 / n;
    assert!((mean_hold / (1.0 / 0.3) - 1.0).abs() < 0.01, "{mean_hold}");
    assert!((to_i / (2.0 / 3.0) - 1.0).abs() < 0.01, "{to_i}");
}

#[test]
fn empirical_generator_matches_rates() {
    let p = ModelParams::default();
    let beta = 0.3;
    let recs = records_from(EpiState::S, beta, 100_000, 23);
    // Occupation times and jump counts per transition.
    let mut time = [0.0f64; 3];
    let mut count = std::collections::HashMap::new();
    for r in &recs {
        for w in r.jumps.windows(2) {
            time[w[0].1.index()] += w[1].0 - w[0].0;
            *count.entry((w[0].1, w[1].1)).or_insert(0usize) += 1;
        }
    }
    let rate = |from: EpiState, to: EpiState| count[&(from, to)] as f64 / time[from.index()];
    let lambda_sa = (rate(EpiState::S, EpiState::A) - p.eta) / beta;
    let checks = [
        (lambda_sa, p.lambda_sa),
        (rate(EpiState::A, EpiState::I), p.lambda_ai),
        (rate(EpiState::A, EpiState::R), p.lambda_ar),
        (rate(EpiState::I, EpiState::R), p.lambda_ir),
        (rate(EpiState::I, EpiState::D), p.lambda_id),
    ];
    for (est, truth) in checks {
        assert!((est / truth - 1.0).abs() < 0.02, "{est} vs {truth}");
    }
}

#[test]
fn objective_matches_closed_forms() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::constant(0.15, 1.0, 100.0).unwrap();
    let (a, i) = FullyObservedPolicy::infected_rows(&p);
    let opt = AgentPolicy::fully_observed(&FullyObservedPolicy::constant(1, a, i, p.gamma), p.gamma);
    let est = estimate_objective(&opt, &beta, &p, EpiState::S, 100_000, 5).unwrap();
    let v = active_value(0.15, phi_bar_a(&p).unwrap(), &p);
    assert!((est.mean - v).abs() < 3.0 * est.stderr, "{est:?} vs {v}");
    assert!(est.tail_bound < 1e-6);

    let idle = AgentPolicy::pre_symptom_constant(0, p.gamma);
    let est = estimate_objective(&idle, &beta, &p, EpiState::I, 100_000, 6).unwrap();
    let phi_i = phi_bar_i(&p).unwrap();
    assert!((est.mean - phi_i).abs() < 3.0 * est.stderr, "{est:?} vs {phi_i}");
}

#[test]
fn objective_needs_enough_agents() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::constant(0.15, 1.0, 10.0).unwrap();
    let pol = AgentPolicy::pre_symptom_constant(1, p.gamma);
    assert!(estimate_objective(&pol, &beta, &p, EpiState::S, 999, 1).is_err());
}

#[test]
fn filter_is_unbiased_for_unsymptomatic_agents() {
    let p = ModelParams::default();
    let beta_bar = 0.2;
    let beta = MeanFieldPath::constant(beta_bar, 1.0, 100.0).unwrap();
    let recs = records_from(EpiState::S, beta_bar, 100_000, 31);
    let traj = integrate_filter(Belief::susceptible(), |_, _| 1.0, &beta, 0.01, 60.0, &p).unwrap();
    for t in [5.0, 15.0, 30.0, 60.0] {
        let alive: Vec<_> = recs.iter().filter(|r| r.tau.is_none_or(|tau| tau > t)).collect();
        let n = alive.len() as f64;
        let in_a = alive.iter().filter(|r| r.state_at(t) == EpiState::A).count() as f64 / n;
        let a_t = traj.at(t).a;
        let se = (a_t * (1.0 - a_t) / n).sqrt();
        assert!((in_a - a_t).abs() < 3.0 * se, "t {t}: {in_a} vs {a_t} (se {se})");
    }
}

#[test]
fn asymptomatic_fraction_tracks_density() {
    let p = ModelParams::default();
    let grid = TriGrid::new(64);
    let initial = BeliefDensity::default_initial(grid).unwrap();
    let beta = MeanFieldPath::constant(0.2, 1.0, 150.0).unwrap();
    let schedule = PolicySchedule::constant(PolicyGrid::constant(grid, 1), 1.0);
    let dt = 0.8 * FpkSolver::new(grid, &p).dt_limit(beta.max());
    let run = propagate(&initial, &schedule, &beta, dt, 150.0, 1.0, &[], &p).unwrap();

    // True states are drawn from the mixture of beliefs in the bump.
    let (s0, a0) = initial.conditional_mean().unwrap();
    let class = EnsembleClass {
        prob: 1.0,
        params: p.clone(),
        policy: AgentPolicy::pre_symptom_constant(1, p.gamma),
        initial: [s0, a0, 0.0, 1.0 - s0 - a0, 0.0],
    };
    let (stats, _) = ensemble_run(&[class], &beta, 10_000, 77, 1.0, 150.0, Feedback::OpenLoop).unwrap();
    assert_eq!(stats.fractions.len(), run.series.len());
    let sup = stats.fractions.iter().zip(&run.series).map(|(f, s)| (f[1] - s.rho_a).abs()).fold(0.0, f64::max);
    assert!(sup < 0.02, "sup distance {sup}");
    assert!((asymptomatic_mass(&run.last) - run.series.last().unwrap().rho_a).abs() < 1e-15);
}

#[test]
fn ensembles_replay_bit_identically() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::constant(0.25, 1.0, 80.0).unwrap();
    let class = EnsembleClass {
        prob: 1.0,
        params: p.clone(),
        policy: AgentPolicy::pre_symptom_constant(1, p.gamma),
        initial: [0.95, 0.05, 0.0, 0.0, 0.0],
    };
    for mode in [Feedback::OpenLoop, Feedback::ClosedLoop] {
        let a = ensemble_run(std::slice::from_ref(&class), &beta, 3000, 9, 0.5, 80.0, mode).unwrap();
        let b = ensemble_run(std::slice::from_ref(&class), &beta, 3000, 9, 0.5, 80.0, mode).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        for (c, f) in a.0.counts.iter().zip(&a.0.fractions) {
            assert_eq!(c.iter().sum::<u64>(), 3000);
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn closed_loop_beta_is_activity_weighted_infected_fraction() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::constant(0.1, 1.0, 40.0).unwrap();
    let class = EnsembleClass {
        prob: 1.0,
        params: p.clone(),
        policy: AgentPolicy::fully_observed(&FullyObservedPolicy::constant(1, 1, 0, p.gamma), p.gamma),
        initial: [0.9, 0.1, 0.0, 0.0, 0.0],
    };
    let (stats, _) = ensemble_run(&[class], &beta, 5000, 12, 0.25, 40.0, Feedback::ClosedLoop).unwrap();
    for (f, b) in stats.fractions.iter().zip(&stats.beta_hat) {
        assert!((f[1] - b).abs() < 1e-15);
    }
    assert!(stats.beta_hat[0] > 0.09);
}

#[test]
fn two_classes_are_mixed_by_probability() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::constant(0.0, 1.0, 1.0).unwrap();
    let make = |prob, initial| EnsembleClass {
        prob,
        params: p.clone(),
        policy: AgentPolicy::pre_symptom_constant(0, p.gamma),
        initial,
    };
    let classes = [make(0.3, [0.0, 0.0, 0.0, 1.0, 0.0]), make(0.7, [1.0, 0.0, 0.0, 0.0, 0.0])];
    let (stats, recs) = ensemble_run(&classes, &beta, 20_000, 2, 1.0, 1.0, Feedback::OpenLoop).unwrap();
    let frac_r = stats.fractions[0][3];
    assert!((frac_r - 0.3).abs() < 3.0 * (0.21f64 / 20_000.0).sqrt(), "{frac_r}");
    assert!(recs.iter().all(|r| (r.theta == 0) == (r.jumps[0].1 == EpiState::R)));
}

#[test]
fn event_log_has_one_line_per_agent() {
    let recs = records_from(EpiState::S, 0.2, 25, 1);
    let dir = tempdir();
    let path = dir.join("events.ndjson");
    write_event_log(&path, &recs).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 25);
    for (line, rec) in text.lines().zip(&recs) {
        let back: epimfg_core::sim::AgentRecord = serde_json::from_str(line).unwrap();
        let states = |r: &epimfg_core::sim::AgentRecord| r.jumps.iter().map(|j| j.1).collect::<Vec<_>>();
        assert_eq!(states(&back), states(rec));
        assert!((back.cost - rec.cost).abs() <= 1e-12 * rec.cost.abs().max(1.0));
    }
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("epimfg-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
