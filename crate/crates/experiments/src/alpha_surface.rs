//! `α_N` over a `(ν, N)` grid, from the closed form and from the LP.

use std::path::PathBuf;

use mfmpc::bounds::BOUND_CSV_HEADER;
use mfmpc::{alpha_n, controllability_from_nu, BoundResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MAX_HORIZON};
use crate::error::Result;
use crate::output::{fmt17, write_csv, write_json};

pub const ALPHA_CSV_HEADER: &str = "nu,N,alpha_closed,alpha_lp";

/// Published positivity threshold at `ν = 100`.
pub const PUBLISHED_NU: f64 = 100.0;
pub const PUBLISHED_N_STAR: usize = 5;
/// Published "best bound", for a plot grid that was not stated.
pub const PUBLISHED_BEST_ALPHA: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct SurfacePoint {
    pub nu: f64,
    pub c: f64,
    pub sigma: f64,
    pub bound: BoundResult<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Threshold {
    pub nu: f64,
    /// Smallest grid `N` with `α_N > 0`; `None` if the grid has none.
    pub n_star_closed: Option<usize>,
    pub n_star_lp: Option<usize>,
    pub agree: bool,
    pub best_alpha: f64,
    pub best_alpha_horizon: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PublishedComparison {
    pub nu: f64,
    /// Smallest `N ≤ 200` with `α_N > 0`, independent of the configured grid.
    pub n_star: Option<usize>,
    pub n_star_published: usize,
    pub n_star_matches_published: bool,
    pub best_alpha_on_grid: f64,
    pub best_alpha_published: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaSurfaceSummary {
    pub thresholds: Vec<Threshold>,
    pub n_star_nondecreasing_in_nu: bool,
    pub max_abs_closed_lp_gap: f64,
    pub published: PublishedComparison,
}

#[derive(Clone, Debug)]
pub struct AlphaSurface {
    pub points: Vec<SurfacePoint>,
    pub summary: AlphaSurfaceSummary,
}

/// Grid values, row order `ν`-major. Independent points are solved in parallel.
pub fn compute_alpha_surface(cfg: &ExperimentConfig) -> Result<AlphaSurface> {
    let grid: Vec<(f64, usize)> = cfg
        .nu
        .iter()
        .flat_map(|&nu| cfg.horizons().map(move |n| (nu, n)))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(nu, n)| {
            let p = controllability_from_nu(nu)?;
            Ok(SurfacePoint {
                nu,
                c: p.c(),
                sigma: p.sigma(),
                bound: BoundResult::compute(&p, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let thresholds: Vec<Threshold> = cfg
        .nu
        .iter()
        .map(|&nu| {
            let row: Vec<&SurfacePoint> = points.iter().filter(|p| p.nu == nu).collect();
            let first = |f: fn(&BoundResult<f64>) -> f64| {
                row.iter()
                    .find(|p| f(&p.bound) > 0.0)
                    .map(|p| p.bound.horizon)
            };
            let n_star_closed = first(|b| b.alpha_closed_form);
            let n_star_lp = first(|b| b.alpha_lp);
            let best = row
                .iter()
                .max_by(|a, b| {
                    a.bound
                        .alpha_closed_form
                        .total_cmp(&b.bound.alpha_closed_form)
                })
                .expect("grid has at least one horizon");
            Threshold {
                nu,
                n_star_closed,
                n_star_lp,
                agree: n_star_closed == n_star_lp,
                best_alpha: best.bound.alpha_closed_form,
                best_alpha_horizon: best.bound.horizon,
            }
        })
        .collect();

    let mut by_nu: Vec<&Threshold> = thresholds.iter().collect();
    by_nu.sort_by(|a, b| a.nu.total_cmp(&b.nu));
    // a missing threshold sorts above every found one
    let key = |t: &Threshold| t.n_star_closed.unwrap_or(usize::MAX);
    let n_star_nondecreasing_in_nu = by_nu.windows(2).all(|w| key(w[0]) <= key(w[1]));

    let max_abs_closed_lp_gap = points
        .iter()
        .map(|p| (p.bound.alpha_closed_form - p.bound.alpha_lp).abs())
        .fold(0.0, f64::max);

    let published = PublishedComparison {
        nu: PUBLISHED_NU,
        n_star: positivity_threshold(PUBLISHED_NU)?,
        n_star_published: PUBLISHED_N_STAR,
        n_star_matches_published: positivity_threshold(PUBLISHED_NU)? == Some(PUBLISHED_N_STAR),
        best_alpha_on_grid: points
            .iter()
            .map(|p| p.bound.alpha_closed_form)
            .fold(f64::NEG_INFINITY, f64::max),
        best_alpha_published: PUBLISHED_BEST_ALPHA,
    };

    Ok(AlphaSurface {
        points,
        summary: AlphaSurfaceSummary {
            thresholds,
            n_star_nondecreasing_in_nu,
            max_abs_closed_lp_gap,
            published,
        },
    })
}

/// Smallest `N` in `2..=200` with `α_N > 0`.
pub fn positivity_threshold(nu: f64) -> Result<Option<usize>> {
    let p = controllability_from_nu(nu)?;
    for n in 2..=MAX_HORIZON {
        if alpha_n(&p, n)? > 0.0 {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Writes the two tables plus `summary.json`; returns their paths.
pub fn run_alpha_surface(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let surface = compute_alpha_surface(cfg)?;
    let dir = &cfg.output_dir;
    let files = vec![
        dir.join("alpha_surface.csv"),
        dir.join("bounds.csv"),
        dir.join("summary.json"),
    ];
    write_csv(
        &files[0],
        ALPHA_CSV_HEADER,
        surface.points.iter().map(|p| {
            format!(
                "{},{},{},{}",
                fmt17(p.nu),
                p.bound.horizon,
                fmt17(p.bound.alpha_closed_form),
                fmt17(p.bound.alpha_lp)
            )
        }),
    )?;
    write_csv(
        &files[1],
        BOUND_CSV_HEADER,
        surface.points.iter().map(|p| {
            let params =
                mfmpc::ControllabilityParams::new(p.c, p.sigma).expect("validated when computed");
            p.bound.csv_row(p.nu, &params)
        }),
    )?;
    write_json(&files[2], &surface.summary)?;
    for t in &surface.summary.thresholds {
        log::info!(
            "nu={} N*_closed={:?} N*_lp={:?}",
            t.nu,
            t.n_star_closed,
            t.n_star_lp
        );
    }
    Ok(files)
}
