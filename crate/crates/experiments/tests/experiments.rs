use mfmpc::{sample_uniform, ControllabilityParams, Interval};
use mfmpc_experiments::alpha_surface::compute_alpha_surface;
use mfmpc_experiments::cost_compare::compute_cost_compare;
use mfmpc_experiments::evolve::{compute_evolution, evolve_one, Histogram, HISTOGRAM_BINS};
use mfmpc_experiments::verify_bound::{verify_one, verify_with, NOT_APPLICABLE};
use mfmpc_experiments::{Experiment, ExperimentConfig};

fn preset(e: Experiment) -> ExperimentConfig {
    ExperimentConfig::preset(e)
}

#[test]
fn single_grid_point_gives_one_row() {
    let mut cfg = preset(Experiment::AlphaSurface);
    cfg.nu = vec![1.0];
    cfg.n_max = 2;
    let s = compute_alpha_surface(&cfg).unwrap();
    assert_eq!(s.points.len(), 1);
    assert_eq!((s.points[0].nu, s.points[0].bound.horizon), (1.0, 2));
}

#[test]
fn positivity_threshold_nondecreasing_in_nu() {
    let mut cfg = preset(Experiment::AlphaSurface);
    cfg.nu = vec![1.0, 10.0, 100.0, 1000.0];
    cfg.n_max = 40;
    let s = compute_alpha_surface(&cfg).unwrap().summary;
    assert!(s.n_star_nondecreasing_in_nu);
    assert!(s
        .thresholds
        .iter()
        .all(|t| t.agree && t.n_star_closed.is_some()));
    assert!(s.max_abs_closed_lp_gap <= 1e-9);
    // reported, not hidden: the threshold at ν = 100 differs from the published 5
    assert_eq!(s.published.n_star, Some(2));
    assert!(!s.published.n_star_matches_published);
}

#[test]
fn surface_rows_keep_grid_order() {
    let mut cfg = preset(Experiment::AlphaSurface);
    cfg.nu = vec![1000.0, 1.0];
    cfg.n_max = 5;
    let s = compute_alpha_surface(&cfg).unwrap();
    let order: Vec<(f64, usize)> = s.points.iter().map(|p| (p.nu, p.bound.horizon)).collect();
    let expected: Vec<(f64, usize)> = [1000.0, 1.0]
        .iter()
        .flat_map(|&nu| (2..=5).map(move |n| (nu, n)))
        .collect();
    assert_eq!(order, expected);
}

#[test]
fn cost_compare_bound_ratio_at_least_one() {
    let cmp = compute_cost_compare(&preset(Experiment::CostCompare)).unwrap();
    for r in &cmp.rows {
        assert!(r.sandwich_holds, "N={}", r.horizon);
        if let Some(ratio) = r.bound_ratio {
            assert!(ratio >= 1.0 - 1e-9, "N={} ratio={ratio}", r.horizon);
        }
        // closed loop under the shrinking window never does worse than always predicting N ahead
        assert!(r.j_t_mpc <= r.j_t_receding * (1.0 + 1e-12));
    }
    let full = cmp.rows.iter().find(|r| r.horizon == 100).unwrap();
    assert!((full.j_t_mpc - full.v_t_opt).abs() <= 1e-9 * full.v_t_opt);
}

#[test]
fn single_particle_has_zero_variance() {
    let mut cfg = preset(Experiment::ParticleEvolution);
    cfg.m = 1;
    cfg.nu = vec![100.0];
    cfg.n_max = 3;
    let (runs, _) = compute_evolution(&cfg, false).unwrap();
    assert!(runs.iter().all(|r| r.variances.iter().all(|&v| v == 0.0)));
}

#[test]
fn longer_horizon_variance_dominates() {
    let cfg = preset(Experiment::ParticleEvolution);
    let f0 = sample_uniform(20_000, Interval::symmetric_unit(), 5).unwrap();
    let short = evolve_one(&cfg, 100.0, 2, 5, f0.clone(), None).unwrap();
    let long = evolve_one(&cfg, 100.0, 10, 5, f0, None).unwrap();
    for (a, b) in long.variances.iter().zip(&short.variances) {
        assert!(a <= &(b + 1e-6));
    }
    assert!(long.variance_monotone && short.variance_monotone);
    assert!(long.max_mean_deviation <= 1e-12);
}

#[test]
fn histogram_counts_every_particle_in_range() {
    let f = sample_uniform(1000, Interval::symmetric_unit(), 3).unwrap();
    let range = Interval::new(-1.1, 1.1).unwrap();
    let h = Histogram::of(&f, range, HISTOGRAM_BINS);
    assert_eq!(h.counts.len(), 100);
    assert_eq!(h.counts.iter().sum::<u64>() + h.outside, 1000);
    assert_eq!(h.outside, 0);
    // uniform[-1, 1] leaves the padding bins empty
    assert_eq!(h.counts[..4].iter().sum::<u64>(), 0);
    assert_eq!(h.counts[96..].iter().sum::<u64>(), 0);
}

#[test]
fn verify_bound_cases() {
    let mut cfg = preset(Experiment::VerifyBound);
    let c = verify_one(&cfg, 100.0, 5).unwrap();
    assert_eq!(c.status, "verified");
    assert!(c.min_slack.unwrap() >= -1e-9);
    assert_eq!(c.along_closed_loop.len(), cfg.t);

    let c = verify_one(&cfg, 100.0, 3).unwrap();
    assert_eq!(c.applicable(), c.alpha > 0.0);

    cfg.y0 = 0.0;
    let c = verify_one(&cfg, 100.0, 5).unwrap();
    assert!(c.all_hold());
    assert!(c.lambdas.iter().all(|&l| l == 0.0));
}

#[test]
fn verify_bound_not_applicable_for_negative_alpha() {
    let cfg = preset(Experiment::VerifyBound);
    let p = ControllabilityParams::new(2.0, 0.5).unwrap();
    let c = verify_with(&cfg, 100.0, &p, 2).unwrap();
    assert!((c.alpha + 3.0).abs() < 1e-12);
    assert_eq!(c.status, NOT_APPLICABLE);
    assert!(!c.applicable() && c.initial.is_none() && c.min_slack.is_none());
}
