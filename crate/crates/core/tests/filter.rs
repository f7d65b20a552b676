use epimfg_core::filter::{a_bar, barrier_derivative, filter_rhs, integrate_filter, Belief};
use epimfg_core::{MeanFieldPath, ModelParams};
use proptest::prelude::*;

#[test]
fn always_active_agent_stays_below_barrier() {
    let p = ModelParams::default();
    for beta_bar in [0.05, 0.15, 0.25] {
        let beta = MeanFieldPath::constant(beta_bar, 1.0, 2000.0).unwrap();
        let traj = integrate_filter(Belief::susceptible(), |_, _| 1.0, &beta, 0.01, 2000.0, &p).unwrap();
        let bar = a_bar(beta_bar, &p).unwrap();
        assert_eq!(traj.a_bar, Some(bar));
        assert!(traj.sup_a < bar, "beta {beta_bar}: {} vs {bar}", traj.sup_a);
        assert!(traj.beliefs.iter().all(|b| b.a < bar));
    }
}

#[test]
fn without_recovery_belief_rises_monotonically_to_barrier() {
    let p = ModelParams { lambda_ar: 0.0, ..ModelParams::default() };
    for beta_bar in [0.05, 0.15, 0.25] {
        let beta = MeanFieldPath::constant(beta_bar, 1.0, 2000.0).unwrap();
        let traj = integrate_filter(Belief::susceptible(), |_, _| 1.0, &beta, 0.01, 2000.0, &p).unwrap();
        let bar = a_bar(beta_bar, &p).unwrap();
        for w in traj.beliefs.windows(2) {
            // Monotone up to rounding from the simplex projection.
            assert!(w[1].a >= w[0].a - 1e-12, "{:?} -> {:?}", w[0], w[1]);
            assert!((w[1].a - bar).abs() <= (w[0].a - bar).abs() + 1e-12);
        }
        assert!((traj.last().a - bar).abs() < 1e-4, "{} vs {bar}", traj.last().a);
    }
}

#[test]
fn barrier_derivative_is_negative_on_the_admissible_range() {
    let p = ModelParams::default();
    for beta_bar in [0.0, 0.05, 0.15, 0.25, 0.3] {
        let bar = a_bar(beta_bar, &p).unwrap();
        for k in 0..50 {
            let s = (1.0 - bar) * k as f64 / 49.0;
            assert!(barrier_derivative(s, beta_bar, &p) <= 0.0);
        }
    }
}

#[test]
fn simplex_drift_stays_below_tolerance() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::from_fn(1.0, 1000.0, |t| 0.2 + 0.1 * (t / 50.0).sin()).unwrap();
    let traj = integrate_filter(
        Belief::new(0.7, 0.2, 0.1).unwrap(),
        |t, _| if (t / 10.0).floor() as i64 % 2 == 0 { 1.0 } else { 0.0 },
        &beta,
        0.01,
        1000.0,
        &p,
    )
    .unwrap();
    assert_eq!(traj.renormalizations, 0);
    for chunk in traj.beliefs.chunks(1000) {
        let start = chunk[0].s + chunk[0].a + chunk[0].r;
        for b in chunk {
            assert!((b.s + b.a + b.r - start).abs() < 1e-10);
        }
    }
}

#[test]
fn trajectory_csv_schema() {
    let p = ModelParams::default();
    let beta = MeanFieldPath::constant(0.15, 1.0, 1.0).unwrap();
    let traj = integrate_filter(Belief::susceptible(), |_, _| 1.0, &beta, 0.1, 1.0, &p).unwrap();
    let file = std::env::temp_dir().join(format!("epimfg-filter-{}.csv", std::process::id()));
    traj.write_csv(&file).unwrap();
    let text = std::fs::read_to_string(&file).unwrap();
    std::fs::remove_file(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,S,A,R,u,a_bar");
    assert_eq!(lines.count(), 11);
}

proptest! {
    #[test]
    fn tangent_to_the_simplex(s in 0.0..1.0f64, frac in 0.0..1.0f64, u in 0.0..1.0f64, beta in 0.0..1.0f64) {
        let a = (1.0 - s) * frac;
        let b = Belief::from_sa(s, a).unwrap();
        let d = filter_rhs(&b, u, beta, &ModelParams::default());
        prop_assert!((d[0] + d[1] + d[2]).abs() < 1e-14);
    }

    #[test]
    fn interior_starts_stay_nonnegative(s in 0.01..0.98f64, frac in 0.01..0.99f64, beta in 0.0..1.0f64) {
        let a = (1.0 - s) * frac;
        let p = ModelParams::default();
        let path = MeanFieldPath::constant(beta, 1.0, 50.0).unwrap();
        let traj = integrate_filter(Belief::from_sa(s, a).unwrap(), |_, _| 1.0, &path, 0.01, 50.0, &p).unwrap();
        prop_assert!(traj.beliefs.iter().all(|b| b.s >= 0.0 && b.a >= 0.0 && b.r >= 0.0));
    }
}
