use epimfg_core::filter::{integrate_filter, Belief};
use epimfg_core::fpk::{asymptomatic_mass, propagate, write_series_csv, write_slice_csv, BeliefDensity, FpkSolver};
use epimfg_core::grid::TriGrid;
use epimfg_core::hjb::{solve_stationary, HjbConfig, PolicyGrid, PolicySchedule};
use epimfg_core::{MeanFieldPath, ModelParams};
use proptest::prelude::*;

fn stable_dt(grid: TriGrid, beta: f64, p: &ModelParams) -> f64 {
    0.8 * FpkSolver::new(grid, p).dt_limit(beta)
}

#[test]
fn total_mass_is_conserved_over_long_horizons() {
    let p = ModelParams::default();
    let grid = TriGrid::new(32);
    let sol = solve_stationary(0.15, &HjbConfig::with_n(32), &p).unwrap();
    let beta = MeanFieldPath::constant(0.15, 1.0, 500.0).unwrap();
    let schedule = PolicySchedule::constant(sol.policy, 1.0);
    let initial = BeliefDensity::default_initial(grid).unwrap();
    let run = propagate(&initial, &schedule, &beta, stable_dt(grid, 0.15, &p), 500.0, 1.0, &[], &p).unwrap();
    assert!(run.max_mass_defect < 1e-6 * 500.0);
    // Mass only leaves the triangle through the symptomatic sink.
    for w in run.series.windows(2) {
        assert!(w[1].mass_triangle <= w[0].mass_triangle + 1e-15);
    }
    assert!(run.last.mass.iter().all(|m| *m >= 0.0));
}

#[test]
fn sink_feeds_the_symptomatic_branch_exactly() {
    let p = ModelParams::default();
    let grid = TriGrid::new(24);
    let mut density = BeliefDensity::gaussian_bump(grid, (0.5, 0.3), 0.08).unwrap();
    let policy = PolicyGrid::constant(grid, 1);
    let dt = stable_dt(grid, 0.3, &p);
    let mut solver = FpkSolver::new(grid, &p);
    for _ in 0..200 {
        let before = density.clone();
        solver.step(&mut density, &policy, 0.3, dt, &p).unwrap();
        let lost = before.triangle_mass() - density.triangle_mass();
        let gained =
            (density.rho_i + density.rho_r_post + density.rho_d) - (before.rho_i + before.rho_r_post + before.rho_d);
        assert!((lost - gained).abs() < 1e-14, "{lost} vs {gained}");
        assert!(lost >= 0.0 && lost <= p.lambda_ai * dt * before.triangle_mass());
    }
}

#[test]
fn conditional_mean_follows_the_filter() {
    let p = ModelParams::default();
    for n in [64, 128] {
        let grid = TriGrid::new(n);
        let initial = BeliefDensity::default_initial(grid).unwrap();
        let beta = MeanFieldPath::constant(0.2, 1.0, 500.0).unwrap();
        let schedule = PolicySchedule::constant(PolicyGrid::constant(grid, 1), 1.0);
        let run = propagate(&initial, &schedule, &beta, stable_dt(grid, 0.2, &p), 500.0, 0.5, &[], &p).unwrap();
        let (s0, a0) = initial.conditional_mean().unwrap();
        let traj = integrate_filter(Belief::from_sa(s0, a0).unwrap(), |_, _| 1.0, &beta, 0.01, 500.0, &p).unwrap();
        let sup = run
            .series
            .iter()
            .map(|x| {
                let b = traj.at(x.t);
                (x.mean_s - b.s).abs().max((x.mean_a - b.a).abs())
            })
            .fold(0.0, f64::max);
        let tol = (2.0 / n as f64).max(0.02);
        assert!(sup < tol, "n {n}: {sup} vs {tol}");
    }
}

#[test]
fn csv_schemas() {
    let p = ModelParams::default();
    let grid = TriGrid::new(8);
    let initial = BeliefDensity::gaussian_bump(grid, (0.5, 0.25), 0.2).unwrap();
    let beta = MeanFieldPath::constant(0.1, 1.0, 2.0).unwrap();
    let schedule = PolicySchedule::constant(PolicyGrid::constant(grid, 1), 1.0);
    let run = propagate(&initial, &schedule, &beta, stable_dt(grid, 0.1, &p), 2.0, 1.0, &[1.0], &p).unwrap();
    assert_eq!(run.slices.len(), 1);
    let dir = std::env::temp_dir().join(format!("epimfg-fpk-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    write_series_csv(dir.join("series.csv"), &run.series).unwrap();
    write_slice_csv(dir.join("slice.csv"), &run.slices[0].1).unwrap();
    let series = std::fs::read_to_string(dir.join("series.csv")).unwrap();
    let slice = std::fs::read_to_string(dir.join("slice.csv")).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(series.lines().next().unwrap(), "t,mass_triangle,rho_a,rho_i,rho_r_total,rho_d,beta,mean_s,mean_a");
    assert_eq!(series.lines().count(), 4);
    assert_eq!(slice.lines().next().unwrap(), "s,a,p");
    assert_eq!(slice.lines().count(), 1 + grid.len());
}

#[test]
fn uniform_density_has_a_third_asymptomatic() {
    let grid = TriGrid::new(40);
    let d = BeliefDensity::from_density_fn(grid, |_, _| 2.0);
    assert!((d.triangle_mass() - 1.0).abs() < 1e-12);
    assert!((asymptomatic_mass(&d) - 1.0 / 3.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn positivity_and_balance_under_random_policies(seed in 0u64..1000, beta in 0.0..1.0f64,
                                                    cs in 0.2..0.8f64, ca in 0.05..0.4f64) {
        let p = ModelParams::default();
        let grid = TriGrid::new(16);
        let mut density = BeliefDensity::gaussian_bump(grid, (cs, ca.min(0.95 - cs)), 0.1).unwrap();
        let policy = PolicyGrid {
            grid,
            t: 0.0,
            u: (0..grid.len()).map(|k| ((seed.wrapping_mul(2654435761).wrapping_add(k as u64 * 40503)) >> 7) as u8 & 1).collect(),
        };
        let dt = stable_dt(grid, beta, &p);
        let mut solver = FpkSolver::new(grid, &p);
        for _ in 0..100 {
            solver.step(&mut density, &policy, beta, dt, &p).unwrap();
        }
        prop_assert!(density.mass.iter().all(|m| *m >= 0.0));
        prop_assert!((density.total_mass() - 1.0).abs() < 1e-13);
    }
}
