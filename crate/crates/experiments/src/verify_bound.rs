//! Checks the controllability inequalities along an MPC closed loop.
//!
//! At every closed-loop state `Y_n` the horizon-`N` solution gives
//! `λ_k = ℓ(Y_k*, v_k*)` and `ν̃ = V_N(Y_1*)`; those are fed to the verifier
//! together with `α_N`.

use std::path::PathBuf;

use mfmpc::mpc::bound_certificate_inputs;
use mfmpc::{
    alpha_n, closed_loop, controllability_from_nu, verify_inequalities, ControllabilityParams,
    HorizonPolicy, InequalityReport, ModelConfig, MomentSummary, MpcConfig,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::write_json;

pub const NOT_APPLICABLE: &str = "bound not applicable";

#[derive(Clone, Debug, Serialize)]
pub struct StateCheck {
    pub n: usize,
    pub mean: f64,
    pub min_slack: f64,
    pub all_hold: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub nu: f64,
    pub horizon: usize,
    pub y0: f64,
    pub alpha: f64,
    /// `"verified"`, `"violated"`, or [`NOT_APPLICABLE`] when `α_N ≤ 0`.
    pub status: String,
    pub lambdas: Vec<f64>,
    pub nu_tilde: Option<f64>,
    /// Full report at the initial state.
    pub initial: Option<InequalityReport>,
    /// Summary at each closed-loop state `n = 0..T-1`.
    pub along_closed_loop: Vec<StateCheck>,
    pub min_slack: Option<f64>,
}

impl BoundCheck {
    pub fn applicable(&self) -> bool {
        self.status != NOT_APPLICABLE
    }

    pub fn all_hold(&self) -> bool {
        self.status != "violated"
    }
}

pub fn verify_one(cfg: &ExperimentConfig, nu: f64, horizon: usize) -> Result<BoundCheck> {
    verify_with(cfg, nu, &controllability_from_nu(nu)?, horizon)
}

/// As [`verify_one`], with the controllability constants given explicitly.
pub fn verify_with(
    cfg: &ExperimentConfig,
    nu: f64,
    p: &ControllabilityParams<f64>,
    horizon: usize,
) -> Result<BoundCheck> {
    let alpha = alpha_n(p, horizon)?;
    let mut check = BoundCheck {
        nu,
        horizon,
        y0: cfg.y0,
        alpha,
        status: NOT_APPLICABLE.to_string(),
        lambdas: Vec::new(),
        nu_tilde: None,
        initial: None,
        along_closed_loop: Vec::new(),
        min_slack: None,
    };
    if alpha <= 0.0 {
        return Ok(check);
    }
    let model = ModelConfig::linear(nu)?.with_dt_gain(cfg.dt, cfg.kernel_gain)?;
    let mpc = MpcConfig::new(horizon, model)?;
    let traj = closed_loop(
        MomentSummary::point(cfg.y0),
        &mpc,
        cfg.t,
        HorizonPolicy::Receding,
    )?;
    for (n, state) in traj.states[..cfg.t].iter().enumerate() {
        let (lambdas, nu_tilde) = bound_certificate_inputs(state.mean, &mpc)?;
        let report = verify_inequalities(&lambdas, nu_tilde, p, alpha)?;
        check.along_closed_loop.push(StateCheck {
            n,
            mean: state.mean,
            min_slack: report.min_slack(),
            all_hold: report.all_hold(),
        });
        if n == 0 {
            check.lambdas = lambdas;
            check.nu_tilde = Some(nu_tilde);
            check.initial = Some(report);
        }
    }
    let ok = check.along_closed_loop.iter().all(|s| s.all_hold);
    check.min_slack = check
        .along_closed_loop
        .iter()
        .map(|s| s.min_slack)
        .reduce(f64::min);
    check.status = if ok { "verified" } else { "violated" }.to_string();
    Ok(check)
}

pub fn compute_verify_bound(cfg: &ExperimentConfig) -> Result<Vec<BoundCheck>> {
    cfg.nu
        .iter()
        .flat_map(|&nu| cfg.horizons().map(move |n| (nu, n)))
        .map(|(nu, n)| verify_one(cfg, nu, n))
        .collect()
}

/// Writes `verify_bound.json`.
pub fn run_verify_bound(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let checks = compute_verify_bound(cfg)?;
    for c in &checks {
        log::info!(
            "nu={} N={} alpha={:.6} status={}",
            c.nu,
            c.horizon,
            c.alpha,
            c.status
        );
    }
    let path = cfg.output_dir.join("verify_bound.json");
    write_json(&path, &serde_json::json!({ "checks": checks }))?;
    Ok(vec![path])
}
