//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mfmpc::dynamics::{simulate, ControlSource};
use mfmpc::measures::wasserstein1;
use mfmpc::mpc::{horizon_objective, instantaneous_feedback, mpc_feedback, solve_horizon};
use mfmpc::{
    alpha_n, alpha_via_lp, beta, controllability_from_nu, sample_uniform, Interval, ModelConfig,
    MomentSummary, MpcConfig, QuadraticMeanCost, RunningCost,
};
use mfmpc_experiments::alpha_surface::{compute_alpha_surface, PUBLISHED_BEST_ALPHA, PUBLISHED_N_STAR};
use mfmpc_experiments::cost_compare::{compute_cost_compare, PUBLISHED_GAP_ORDER};
use mfmpc_experiments::evolve::{evolve_one, VARIANCE_SLACK};
use mfmpc_experiments::seeds::derive_seed;
use mfmpc_experiments::{run, Experiment, ExperimentConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit_secs: u64, elapsed: Duration, mut o: Outcome) -> Outcome {
    if elapsed > Duration::from_secs(limit_secs) {
        o.pass = false;
        o.detail
            .push_str(&format!("; runtime limit {limit_secs} s exceeded"));
    }
    o
}

fn equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [1.0f64, 10.0, 100.0, 1000.0] {
        let p = controllability_from_nu(nu).unwrap();
        for n in 2..=20 {
            let gap = (alpha_n(&p, n).unwrap() - alpha_via_lp(&p, n).unwrap()).abs();
            worst = worst.max(gap);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |alpha_N - alpha_lp| = {worst:.3e} over 76 grid points"),
    )
}

fn positivity_threshold() -> Outcome {
    let mut cfg = ExperimentConfig::preset(Experiment::AlphaSurface);
    cfg.nu = vec![100.0];
    cfg.n_max = 200;
    let s = compute_alpha_surface(&cfg).unwrap().summary;
    let t = &s.thresholds[0];
    outcome(
        t.n_star_closed.is_some() && t.agree,
        format!(
            "N*(100): closed form {:?}, LP {:?}; published value {PUBLISHED_N_STAR} (matches: {})",
            t.n_star_closed, t.n_star_lp, s.published.n_star_matches_published
        ),
    )
}

fn controllability_equality() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.1, 1.0, 10.0, 100.0] {
        let model = ModelConfig::linear(nu).unwrap();
        let cost = QuadraticMeanCost::new(nu).unwrap();
        let p = controllability_from_nu(nu).unwrap();
        let feedback = |_: usize, m: &MomentSummary<f64>| Ok(instantaneous_feedback(m.mean, nu));
        let f0 = MomentSummary::point(1.0);
        let l0 = cost.optimal(&f0);
        let traj = simulate(f0, ControlSource::Feedback(&feedback), 51, &model, &cost).unwrap();
        for (n, &l) in traj.step_costs.iter().enumerate() {
            worst = worst.max((l - beta(l0, n, &p)).abs() / l0);
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max |l(f_n,u_n) - C sigma^n l*(f_0)| / l*(f_0) = {worst:.3e}, n <= 50"),
    )
}

fn cost_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Experiment::CostCompare);
    cfg.nu = vec![100.0];
    cfg.t = 100;
    cfg.y0 = 1.0;
    cfg
}

fn sandwich() -> Outcome {
    let mut cfg = cost_config();
    cfg.n_min = 5;
    cfg.include_full_horizon = false;
    let cmp = compute_cost_compare(&cfg).unwrap();
    let mut checked = 0;
    let mut pass = true;
    let mut tightest = f64::INFINITY;
    for r in cmp.rows.iter().filter(|r| r.alpha > 0.0) {
        checked += 1;
        pass &= r.alpha * r.j_t_mpc <= r.v_t_opt * (1.0 + 1e-9);
        pass &= r.j_t_mpc >= r.v_t_opt * (1.0 - 1e-9);
        tightest = tightest.min(r.v_t_opt / (r.alpha * r.j_t_mpc));
    }
    outcome(
        pass && checked == 6,
        format!("alpha_N J_T <= V_T <= J_T for {checked} horizons N=5..10; smallest V_T/(alpha_N J_T) = {tightest:.4}"),
    )
}

fn convergence() -> Outcome {
    let cmp = compute_cost_compare(&cost_config()).unwrap();
    let s = &cmp.summaries[0];
    let gap = s.full_horizon_rel_gap.unwrap_or(f64::INFINITY);
    outcome(
        s.j_nonincreasing_in_n && gap <= 1e-9,
        format!(
            "J_T nonincreasing in N: {}; |J_T(N=T) - V_T|/V_T = {gap:.3e}; scaled bound ratio at N=5 = {:.3} (published order {PUBLISHED_GAP_ORDER:.0e})",
            s.j_nonincreasing_in_n,
            s.bound_ratio_at_5.unwrap_or(f64::NAN)
        ),
    )
}

fn particle_consistency() -> Outcome {
    let mut cfg = ExperimentConfig::preset(Experiment::ParticleEvolution);
    cfg.m = 10_000;
    cfg.t = 100;
    let keep = 1.0 - cfg.dt * cfg.kernel_gain;
    let f0 = sample_uniform(
        cfg.m,
        Interval::symmetric_unit(),
        derive_seed(cfg.seed, &[0]),
    )
    .unwrap();
    let mut mean_dev: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    for n in [2, 10] {
        let r = evolve_one(&cfg, 100.0, n, cfg.seed, f0.clone(), None).unwrap();
        mean_dev = mean_dev.max(r.max_mean_deviation);
        contraction = contraction.max(r.max_contraction_error / (keep * keep));
    }
    outcome(
        mean_dev <= 1e-12 && contraction <= 1e-10,
        format!("M=1e4, 100 steps: max mean deviation {mean_dev:.3e}; max relative contraction error {contraction:.3e}"),
    )
}

fn figure_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset(Experiment::ParticleEvolution);
    cfg.output_dir = dir.path().to_path_buf();
    run(&cfg).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let series = summary["series"].as_array().unwrap();
    let mut pass = series.len() == 2;
    let mut spread = Vec::new();
    for s in series {
        let terminal: Vec<f64> = s["terminal_variance"]
            .as_array()
            .unwrap()
            .iter()
            .map(|pair| pair[1].as_f64().unwrap())
            .collect();
        pass &= terminal.len() == 9 && terminal.windows(2).all(|w| w[1] <= w[0] + VARIANCE_SLACK);
        let lo = terminal.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = terminal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread.push(format!("nu={}: Var_T in [{lo:.6e}, {hi:.6e}]", s["nu"]));
    }
    outcome(
        pass,
        format!(
            "M=1e5, N=2..10, terminal variance nonincreasing in N within {VARIANCE_SLACK:e}; {}",
            spread.join(", ")
        ),
    )
}

/// Minimises `J_N` by Gaussian elimination on the full `N×N` normal equations.
fn dense_qp_value(y0: f64, n: usize, nu: f64, dt: f64) -> f64 {
    // Y_k = y0 + dt Σ_{i<k} v_i, so ∂Y_k/∂v_i = dt for i < k
    let mut h = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            let shared = n.saturating_sub(i.max(j) + 1) as f64;
            h[i][j] = dt * dt * shared + if i == j { nu } else { 0.0 };
        }
        h[i][n] = -dt * y0 * n.saturating_sub(i + 1) as f64;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| h[a][col].abs().total_cmp(&h[b][col].abs()))
            .unwrap();
        h.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let factor = h[row][col] / h[col][col];
                for k in col..=n {
                    h[row][k] -= factor * h[col][k];
                }
            }
        }
    }
    let v: Vec<f64> = (0..n).map(|i| h[i][n] / h[i][i]).collect();
    horizon_objective(y0, &v, nu, dt)
}

fn solver_correctness() -> Outcome {
    let mut qp_gap: f64 = 0.0;
    for nu in [0.1, 1.0, 10.0, 100.0] {
        for n in [2, 3, 5, 10, 40] {
            for y0 in [-2.0, 0.3, 1.0] {
                let cfg = MpcConfig::new(n, ModelConfig::linear(nu).unwrap()).unwrap();
                let v = solve_horizon(y0, &cfg).unwrap().value;
                qp_gap = qp_gap.max((v - dense_qp_value(y0, n, nu, 1.0)).abs() / v.max(1.0));
            }
        }
    }

    // uniform grids of step h; the minimum over the grid is within ½·λ_max·N·h² of the optimum
    let h = 1e-3;
    let mut grid_ok = true;
    for nu in [1.0, 10.0] {
        let y0 = 1.0;
        let cfg2 = MpcConfig::new(2, ModelConfig::linear(nu).unwrap()).unwrap();
        let best2 = (-1500..=1500)
            .map(|i| horizon_objective(y0, &[i as f64 * h, 0.0], nu, 1.0))
            .fold(f64::INFINITY, f64::min);
        let cfg3 = MpcConfig::new(3, ModelConfig::linear(nu).unwrap()).unwrap();
        let best3 = (-600..=100)
            .flat_map(|i| (-600..=100).map(move |j| (i, j)))
            .map(|(i, j)| horizon_objective(y0, &[i as f64 * h, j as f64 * h, 0.0], nu, 1.0))
            .fold(f64::INFINITY, f64::min);
        for (best, cfg, n) in [(best2, &cfg2, 2.0), (best3, &cfg3, 3.0)] {
            let v = solve_horizon(y0, cfg).unwrap().value;
            let slack = 0.5 * (nu + n * n) * n * h * h;
            grid_ok &= best >= v - 1e-12 && best - v <= slack;
        }
    }

    let mut feedback_gap: f64 = 0.0;
    for nu in [0.1f64, 1.0, 10.0, 100.0, 1000.0] {
        let cfg = MpcConfig::new(2, ModelConfig::linear(nu).unwrap()).unwrap();
        for y in [-3.0, -0.5, 0.0, 0.7, 2.0] {
            feedback_gap =
                feedback_gap.max((mpc_feedback(y, &cfg).unwrap() - (-y / (1.0 + nu))).abs());
        }
    }
    outcome(
        qp_gap <= 1e-8 && grid_ok && feedback_gap <= 1e-12,
        format!(
            "Riccati vs dense QP {qp_gap:.3e}; grid oracle N=2,3 within resolution: {grid_ok}; N=2 feedback vs -Y/(1+nu) {feedback_gap:.3e}"
        ),
    )
}

fn metric_properties() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..1000u64 {
        let sizes = [
            1 + case as usize % 17,
            1 + (case as usize * 7) % 23,
            1 + (case as usize * 13) % 31,
        ];
        let [f, g, k]: [mfmpc::EmpiricalMeasure<f64>; 3] = [0u64, 1, 2].map(|i| {
            sample_uniform(
                sizes[i as usize],
                Interval::symmetric_unit(),
                derive_seed(case, &[i]),
            )
            .unwrap()
        });
        let (fg, gf) = (wasserstein1(&f, &g), wasserstein1(&g, &f));
        let fk = wasserstein1(&f, &k);
        let gk = wasserstein1(&g, &k);
        let scale = 1.0 + fg.max(fk).max(gk);
        let c = (case as f64 * 0.37).sin() * 2.0;
        let translated = wasserstein1(&f, &f.shifted(c));
        let violations = [
            wasserstein1(&f, &f),
            (fg - gf).abs(),
            (fk - (fg + gk)).max(0.0),
            (-fg).max(0.0),
            (translated - c.abs()).abs(),
        ];
        worst = worst.max(violations.iter().fold(0.0f64, |a, &b| a.max(b)) / scale);
    }
    outcome(worst <= 1e-12, format!("1000 random triples: worst identity/symmetry/triangle/translation violation {worst:.3e}"))
}

fn asymptotics() -> Outcome {
    let preset = ExperimentConfig::preset(Experiment::AlphaSurface);
    let mut pass = true;
    let mut weakest = f64::INFINITY;
    for &nu in preset.nu.iter().filter(|&&nu| nu <= 100.0 + 1e-9) {
        let p = controllability_from_nu(nu).unwrap();
        let alphas: Vec<f64> = (2..=200).map(|n| alpha_n(&p, n).unwrap()).collect();
        pass &= alphas.windows(2).all(|w| w[1] >= w[0]);
        weakest = weakest.min(alphas[198]);
    }
    pass &= weakest >= 0.9;
    let best = compute_alpha_surface(&preset)
        .unwrap()
        .summary
        .published
        .best_alpha_on_grid;
    outcome(
        pass,
        format!(
            "alpha_N nondecreasing in N up to 200 for nu <= 100; min alpha_200 = {weakest:.4}; best on preset grid {best:.4} vs published {PUBLISHED_BEST_ALPHA}"
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (usize, &'static str, Option<u64>, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (1, "closed-form/LP bound equivalence", Some(5), equivalence),
        (
            2,
            "positivity threshold at nu=100",
            None,
            positivity_threshold,
        ),
        (
            3,
            "exponential controllability equality",
            None,
            controllability_equality,
        ),
        (4, "suboptimality sandwich", Some(10), sandwich),
        (5, "MPC convergence to optimal", None, convergence),
        (
            6,
            "particle/reduced consistency",
            Some(5),
            particle_consistency,
        ),
        (
            7,
            "desk-scale figure reproduction",
            Some(60),
            figure_reproduction,
        ),
        (8, "MPC solver correctness", None, solver_correctness),
        (9, "measure metric properties", None, metric_properties),
        (10, "alpha_N asymptotics", None, asymptotics),
    ];
    let mut failures = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let mut o = check();
        let elapsed = start.elapsed();
        if let Some(secs) = limit {
            o = within(secs, elapsed, o);
        }
        failures += usize::from(!o.pass);
        println!(
            "{} [{id:>2}] {name}: {} ({:.2} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
