use epimfg_core::fully_observed::beta_crit;
use epimfg_core::hjb::HjbConfig;
use epimfg_core::mfe::{best_response, find_mfe, population_response, BestResponse, MfeConfig};
use epimfg_core::model::{Attribute, RateOverrides};
use epimfg_core::{MeanFieldPath, ModelParams};

fn small_partial() -> MfeConfig {
    MfeConfig { t_end: 40.0, hjb: HjbConfig::with_n(16), max_iter: 6, ..MfeConfig::partially_observed_default() }
}

#[test]
fn partially_observed_best_response_isolates_above_critical_level() {
    let p = ModelParams::default();
    let cfg = small_partial();
    let beta = MeanFieldPath::constant(1.1 * beta_crit(&p).unwrap(), cfg.path_dt, cfg.t_end).unwrap();
    match best_response(&beta, &p, &cfg).unwrap() {
        BestResponse::Partial(schedules) => {
            for policy in &schedules[0].policies {
                assert_eq!(policy.active_interior_nodes(), 0);
            }
        }
        BestResponse::Fully(_) => panic!("wrong mode"),
    }
}

#[test]
fn partially_observed_report_keeps_its_history() {
    let p = ModelParams::default();
    let cfg = small_partial();
    let initial = MeanFieldPath::constant(0.1, cfg.path_dt, cfg.t_end).unwrap();
    let report = find_mfe(&initial, &p, &cfg).unwrap();
    assert_eq!(report.residuals.len(), report.iterations);
    assert!(report.iterations <= cfg.max_iter);
    assert!(report.beta.values().iter().all(|b| (0.0..=1.0).contains(b)));
    assert!(report.final_residual.is_finite());
    assert_eq!(report.converged, report.final_residual < cfg.tol);
    let summary = report.summary(&cfg);
    let text = serde_json::to_string(&summary).unwrap();
    assert!(text.contains("\"residuals\""));
}

#[test]
fn heterogeneous_fully_observed_population_still_settles_at_zero() {
    let p = ModelParams {
        attributes: vec![
            Attribute {
                id: "fast".into(),
                prob: 0.4,
                overrides: RateOverrides { lambda_ai: Some(0.5), ..Default::default() },
            },
            Attribute { id: "slow".into(), prob: 0.6, overrides: RateOverrides::default() },
        ],
        ..ModelParams::default()
    };
    let cfg = MfeConfig { t_end: 400.0, ..MfeConfig::fully_observed_default() };
    let initial = MeanFieldPath::constant(0.5, cfg.path_dt, cfg.t_end).unwrap();
    let report = find_mfe(&initial, &p, &cfg).unwrap();
    assert!(report.converged);
    assert!(report.beta.max() < 1e-6);
    match report.policies {
        BestResponse::Fully(ref policies) => assert_eq!(policies.len(), 2),
        BestResponse::Partial(_) => panic!("wrong mode"),
    }
}

#[test]
fn population_response_mixes_partially_observed_classes() {
    let base = ModelParams::default();
    let cfg = small_partial();
    let beta = MeanFieldPath::constant(0.05, cfg.path_dt, cfg.t_end).unwrap();
    let single = |overrides: RateOverrides| {
        let p = ModelParams { attributes: vec![Attribute { id: "x".into(), prob: 1.0, overrides }], ..base.clone() };
        let resp = best_response(&beta, &p, &cfg).unwrap();
        population_response(&resp, &beta, &p, &cfg).unwrap()
    };
    let fast = RateOverrides { lambda_ai: Some(0.4), ..Default::default() };
    let b1 = single(RateOverrides::default());
    let b2 = single(fast.clone());
    let mixed = ModelParams {
        attributes: vec![
            Attribute { id: "a".into(), prob: 0.5, overrides: RateOverrides::default() },
            Attribute { id: "b".into(), prob: 0.5, overrides: fast },
        ],
        ..base.clone()
    };
    let resp = best_response(&beta, &mixed, &cfg).unwrap();
    let out = population_response(&resp, &beta, &mixed, &cfg).unwrap();
    for k in 0..out.len() {
        let expected = 0.5 * (b1.values()[k] + b2.values()[k]);
        assert!((out.values()[k] - expected).abs() < 1e-14);
    }
    assert!(out.max() > 0.0);
}
