//! Closed-loop MPC cost against the horizon-`T` optimum on the reduced system.

use std::path::PathBuf;

use mfmpc::mpc::riccati;
use mfmpc::{
    alpha_n, closed_loop, controllability_from_nu, HorizonPolicy, ModelConfig, MomentSummary,
    MpcConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{fmt17, fmt_opt, write_csv, write_json};

pub const COST_CSV_HEADER: &str = "N,J_T_mpc,V_T_opt,alpha_N,bound_ratio";

/// Order of magnitude of the scaled-bound gap the published results report at `N = 5`.
pub const PUBLISHED_GAP_ORDER: f64 = 1e3;

/// Relative slack of the sandwich `α_N·J_T ≤ V_T ≤ J_T`.
pub const SANDWICH_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct CostRow {
    pub nu: f64,
    pub horizon: usize,
    /// `Σ_{n<T} ℓ` along the closed loop with horizon `min(N, T - n)`.
    pub j_t_mpc: f64,
    /// Same, always predicting `N` steps ahead.
    pub j_t_receding: f64,
    pub v_t_opt: f64,
    pub alpha: f64,
    /// `V_T/(α_N·J_T)`, only when `α_N > 0`.
    pub bound_ratio: Option<f64>,
    /// `ℓ*` at the final closed-loop state.
    pub tail: f64,
    /// `α_N·J_T ≤ V_T ≤ J_T` up to [`SANDWICH_RTOL`]; vacuous on the left when `α_N ≤ 0`.
    pub sandwich_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CostSeriesSummary {
    pub nu: f64,
    pub v_t_opt: f64,
    pub j_nonincreasing_in_n: bool,
    /// `|J_T - V_T|/V_T` at `N = T`, when that row was computed.
    pub full_horizon_rel_gap: Option<f64>,
    /// `V_T/(α_5·J_T)` next to the published order of magnitude.
    pub bound_ratio_at_5: Option<f64>,
    pub published_gap_order: f64,
}

#[derive(Clone, Debug)]
pub struct CostComparison {
    pub rows: Vec<CostRow>,
    pub summaries: Vec<CostSeriesSummary>,
}

fn model(cfg: &ExperimentConfig, nu: f64) -> Result<ModelConfig<f64>> {
    Ok(ModelConfig::linear(nu)?.with_dt_gain(cfg.dt, cfg.kernel_gain)?)
}

/// `V_T(Y0) = p_0·Y0²` from the horizon-`T` Riccati recursion.
pub fn optimal_truncated_value(y0: f64, nu: f64, dt: f64, t: usize) -> f64 {
    riccati(t, nu, dt).0[0] * y0 * y0
}

fn closed_loop_cost(
    cfg: &ExperimentConfig,
    nu: f64,
    n: usize,
    policy: HorizonPolicy,
) -> Result<(f64, f64)> {
    let mpc = MpcConfig::new(n, model(cfg, nu)?)?;
    let traj = closed_loop(MomentSummary::point(cfg.y0), &mpc, cfg.t, policy)?;
    let last = traj.states.last().expect("nonempty").mean;
    Ok((traj.total_cost, 0.5 * last * last))
}

pub fn compute_cost_compare(cfg: &ExperimentConfig) -> Result<CostComparison> {
    let mut horizons: Vec<usize> = cfg.horizons().collect();
    if cfg.include_full_horizon && cfg.t >= 2 && !horizons.contains(&cfg.t) {
        horizons.push(cfg.t);
    }
    let grid: Vec<(f64, usize)> = cfg
        .nu
        .iter()
        .flat_map(|&nu| horizons.iter().map(move |&n| (nu, n)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(nu, n)| {
            let (j_t_mpc, tail) = closed_loop_cost(cfg, nu, n, HorizonPolicy::ShrinkToWindow)?;
            let (j_t_receding, _) = closed_loop_cost(cfg, nu, n, HorizonPolicy::Receding)?;
            let v_t_opt = optimal_truncated_value(cfg.y0, nu, cfg.dt, cfg.t);
            let alpha = alpha_n(&controllability_from_nu(nu)?, n)?;
            let bound_ratio = (alpha > 0.0).then(|| v_t_opt / (alpha * j_t_mpc));
            let upper = alpha <= 0.0 || alpha * j_t_mpc <= v_t_opt * (1.0 + SANDWICH_RTOL);
            let lower = j_t_mpc >= v_t_opt * (1.0 - SANDWICH_RTOL);
            Ok(CostRow {
                nu,
                horizon: n,
                j_t_mpc,
                j_t_receding,
                v_t_opt,
                alpha,
                bound_ratio,
                tail,
                sandwich_holds: upper && lower,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = cfg
        .nu
        .iter()
        .map(|&nu| {
            let series: Vec<&CostRow> = rows.iter().filter(|r| r.nu == nu).collect();
            let v_t_opt = optimal_truncated_value(cfg.y0, nu, cfg.dt, cfg.t);
            CostSeriesSummary {
                nu,
                v_t_opt,
                j_nonincreasing_in_n: series.windows(2).all(|w| w[1].j_t_mpc <= w[0].j_t_mpc),
                full_horizon_rel_gap: series
                    .iter()
                    .find(|r| r.horizon == cfg.t)
                    .map(|r| (r.j_t_mpc - v_t_opt).abs() / v_t_opt),
                bound_ratio_at_5: series
                    .iter()
                    .find(|r| r.horizon == 5)
                    .and_then(|r| r.bound_ratio),
                published_gap_order: PUBLISHED_GAP_ORDER,
            }
        })
        .collect();
    Ok(CostComparison { rows, summaries })
}

/// Writes `cost_compare.csv` and `summary.json`.
pub fn run_cost_compare(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let cmp = compute_cost_compare(cfg)?;
    let dir = &cfg.output_dir;
    let mut files = Vec::new();
    for (i, &nu) in cfg.nu.iter().enumerate() {
        // one table per ν; a single ν keeps the plain file name
        let name = if cfg.nu.len() == 1 {
            "cost_compare.csv".to_string()
        } else {
            format!("cost_compare_nu{i:02}.csv")
        };
        let path = dir.join(name);
        write_csv(
            &path,
            COST_CSV_HEADER,
            cmp.rows.iter().filter(|r| r.nu == nu).map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.horizon,
                    fmt17(r.j_t_mpc),
                    fmt17(r.v_t_opt),
                    fmt17(r.alpha),
                    fmt_opt(r.bound_ratio)
                )
            }),
        )?;
        files.push(path);
    }
    let summary = dir.join("summary.json");
    write_json(
        &summary,
        &serde_json::json!({ "rows": cmp.rows, "series": cmp.summaries }),
    )?;
    files.push(summary);
    Ok(files)
}
