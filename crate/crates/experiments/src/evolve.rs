//! Particle ensembles under closed-loop MPC, streamed step by step.
//!
//! Keeping every state of a `10⁵`-particle run would cost ~80 MB, so each run
//! holds only the current ensemble and writes moments and histograms as it goes.

use std::io::Write;
use std::path::{Path, PathBuf};

use mfmpc::mpc::MpcController;
use mfmpc::{
    sample_uniform, step_particles, EmpiricalMeasure, HorizonPolicy, Interval, MeanFieldState,
    ModelConfig, MomentSummary, MpcConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{create, fmt17, write_csv, write_json};
use crate::seeds::derive_seed;

pub const SERIES_CSV_HEADER: &str =
    "n,mean,second_moment,variance,u,step_cost,reduced_mean,reduced_variance";
pub const HISTOGRAM_CSV_HEADER: &str = "bin_lo,bin_hi,count,density";
pub const HISTOGRAM_BINS: usize = 100;
/// Terminal variances within this of each other count as equal across `N`.
pub const VARIANCE_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionRun {
    pub nu: f64,
    pub horizon: usize,
    pub seed: u64,
    pub particles: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub controls: Vec<f64>,
    pub reduced_means: Vec<f64>,
    pub reduced_variances: Vec<f64>,
    /// `max_n |mean_n - reduced_mean_n|`.
    pub max_mean_deviation: f64,
    /// `max_n |var_{n+1}/var_n - (1 - Δt·P)²|`, over steps with positive variance.
    pub max_contraction_error: f64,
    pub variance_monotone: bool,
    pub max_excursions: usize,
    pub directory: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionSummary {
    pub nu: f64,
    pub seed: u64,
    /// `(N, Var_T)` in increasing `N`.
    pub terminal_variance: Vec<(usize, f64)>,
    pub terminal_variance_nonincreasing_in_n: bool,
}

pub struct Histogram {
    pub range: Interval<f64>,
    pub counts: Vec<u64>,
    /// Particles outside `range`.
    pub outside: u64,
}

impl Histogram {
    pub fn of(f: &EmpiricalMeasure<f64>, range: Interval<f64>, bins: usize) -> Self {
        let mut counts = vec![0u64; bins];
        let mut outside = 0;
        let scale = bins as f64 / range.width();
        for &x in f.particles() {
            if !range.contains(x) {
                outside += 1;
                continue;
            }
            let k = (((x - range.lo()) * scale) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Self {
            range,
            counts,
            outside,
        }
    }

    pub fn write_csv(&self, path: &Path, total: usize) -> Result<()> {
        let bins = self.counts.len();
        let width = self.range.width() / bins as f64;
        let mut out = create(path)?;
        writeln!(out, "{HISTOGRAM_CSV_HEADER}")?;
        for (k, &c) in self.counts.iter().enumerate() {
            let lo = self.range.lo() + width * k as f64;
            let hi = if k + 1 == bins {
                self.range.hi()
            } else {
                lo + width
            };
            writeln!(
                out,
                "{},{},{c},{}",
                fmt17(lo),
                fmt17(hi),
                fmt17(c as f64 / (total as f64 * width))
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Histogram range: the initial domain with each end pushed out by 10% of the half-width.
pub fn histogram_range(domain: Interval<f64>) -> Interval<f64> {
    domain.padded(0.05)
}

fn model(cfg: &ExperimentConfig, nu: f64) -> Result<ModelConfig<f64>> {
    Ok(ModelConfig::linear(nu)?.with_dt_gain(cfg.dt, cfg.kernel_gain)?)
}

/// One closed loop of `cfg.t` steps from `f0`, with the reduced system run alongside.
/// Writes `series.csv` and `histograms/step_NNN.csv` under `dir` when given.
pub fn evolve_one(
    cfg: &ExperimentConfig,
    nu: f64,
    horizon: usize,
    seed: u64,
    f0: EmpiricalMeasure<f64>,
    dir: Option<&Path>,
) -> Result<EvolutionRun> {
    let model = model(cfg, nu)?;
    let mpc = MpcConfig::new(horizon, model.clone())?;
    let cost = mpc.cost;
    let controller = MpcController::new(mpc, HorizonPolicy::Receding, cfg.t);
    let keep = 1.0 - model.contraction();
    let range = histogram_range(f0.domain());
    let total = f0.len();

    let mut series = match dir {
        Some(d) => {
            let mut w = create(&d.join("series.csv"))?;
            writeln!(w, "{SERIES_CSV_HEADER}")?;
            Some(w)
        }
        None => None,
    };

    let mut run = EvolutionRun {
        nu,
        horizon,
        seed,
        particles: total,
        means: Vec::with_capacity(cfg.t + 1),
        variances: Vec::with_capacity(cfg.t + 1),
        controls: Vec::with_capacity(cfg.t),
        reduced_means: Vec::with_capacity(cfg.t + 1),
        reduced_variances: Vec::with_capacity(cfg.t + 1),
        max_mean_deviation: 0.0,
        max_contraction_error: 0.0,
        variance_monotone: true,
        max_excursions: 0,
        directory: dir.map(Path::to_path_buf),
    };

    let mut f = f0;
    let mut reduced: MomentSummary<f64> = f.moments();
    for n in 0..=cfg.t {
        let m = f.moments();
        if let Some(d) = dir {
            Histogram::of(&f, range, HISTOGRAM_BINS)
                .write_csv(&d.join(format!("histograms/step_{n:03}.csv")), total)?;
        }
        run.max_excursions = run.max_excursions.max(f.excursions());
        run.max_mean_deviation = run.max_mean_deviation.max((m.mean - reduced.mean).abs());
        if let Some(&prev) = run.variances.last() {
            if prev > 0.0 {
                run.max_contraction_error = run
                    .max_contraction_error
                    .max((m.variance / prev - keep * keep).abs());
            }
            // relative 1e-12 absorbs rounding in the two-pass variance
            run.variance_monotone &= m.variance <= prev * (1.0 + 1e-12);
        }
        run.means.push(m.mean);
        run.variances.push(m.variance);
        run.reduced_means.push(reduced.mean);
        run.reduced_variances.push(reduced.variance);

        let control = (n < cfg.t)
            .then(|| controller.control(n, m.mean))
            .transpose()?;
        if let Some(w) = series.as_mut() {
            let tail = match control {
                Some(u) => format!("{},{}", fmt17(u), fmt17(cost.of_mean(m.mean, u))),
                None => ",".to_string(),
            };
            writeln!(
                w,
                "{n},{},{},{},{tail},{},{}",
                fmt17(m.mean),
                fmt17(m.second_moment),
                fmt17(m.variance),
                fmt17(reduced.mean),
                fmt17(reduced.variance)
            )?;
        }
        if let Some(u) = control {
            run.controls.push(u);
            // the reduced system gets its own feedback, so the two loops are independent
            let u_reduced = controller.control(n, reduced.mean)?;
            reduced = reduced.advance(u_reduced, &model)?;
            f = step_particles(&f, u, &model);
        }
    }
    if let Some(mut w) = series {
        w.flush()?;
    }
    Ok(run)
}

pub fn run_directory(cfg: &ExperimentConfig, nu: f64, horizon: usize) -> PathBuf {
    cfg.output_dir.join(format!("nu_{nu}_N_{horizon}"))
}

/// Ensemble seed for the `i`-th `ν`; shared by every `N`, so horizons are compared on identical data.
pub fn ensemble_seed(cfg: &ExperimentConfig, nu_index: usize) -> u64 {
    derive_seed(cfg.seed, &[nu_index as u64])
}

/// All `(ν, N)` runs; `write` controls whether per-run files are produced.
pub fn compute_evolution(
    cfg: &ExperimentConfig,
    write: bool,
) -> Result<(Vec<EvolutionRun>, Vec<EvolutionSummary>)> {
    let ensembles = cfg
        .nu
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let seed = ensemble_seed(cfg, i);
            Ok((
                seed,
                sample_uniform(cfg.m, Interval::symmetric_unit(), seed)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid: Vec<(usize, usize)> = (0..cfg.nu.len())
        .flat_map(|i| cfg.horizons().map(move |n| (i, n)))
        .collect();
    let runs = grid
        .par_iter()
        .map(|&(i, n)| {
            let nu = cfg.nu[i];
            let (seed, f0) = &ensembles[i];
            let dir = write.then(|| run_directory(cfg, nu, n));
            evolve_one(cfg, nu, n, *seed, f0.clone(), dir.as_deref())
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = cfg
        .nu
        .iter()
        .enumerate()
        .map(|(i, &nu)| {
            let terminal: Vec<(usize, f64)> = runs
                .iter()
                .filter(|r| r.nu == nu)
                .map(|r| (r.horizon, *r.variances.last().expect("nonempty")))
                .collect();
            EvolutionSummary {
                nu,
                seed: ensembles[i].0,
                terminal_variance_nonincreasing_in_n: terminal
                    .windows(2)
                    .all(|w| w[1].1 <= w[0].1 + VARIANCE_SLACK),
                terminal_variance: terminal,
            }
        })
        .collect();
    Ok((runs, summaries))
}

/// Per-run directories `nu_<ν>_N_<N>/` with `series.csv` and `histograms/`, plus
/// `runs.csv` and `summary.json` at the top level.
pub fn run_particle_evolution(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (runs, summaries) = compute_evolution(cfg, true)?;
    let dir = &cfg.output_dir;
    let index = dir.join("runs.csv");
    write_csv(
        &index,
        "nu,N,seed,terminal_mean,terminal_variance,max_mean_deviation,variance_monotone,max_excursions,directory",
        runs.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                fmt17(r.nu),
                r.horizon,
                r.seed,
                fmt17(*r.means.last().expect("nonempty")),
                fmt17(*r.variances.last().expect("nonempty")),
                fmt17(r.max_mean_deviation),
                r.variance_monotone,
                r.max_excursions,
                r.directory.as_ref().and_then(|d| d.file_name()).map(|s| s.to_string_lossy()).unwrap_or_default()
            )
        }),
    )?;
    let summary = dir.join("summary.json");
    let run_meta: Vec<_> = runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "nu": r.nu,
                "N": r.horizon,
                "seed": r.seed,
                "max_mean_deviation": r.max_mean_deviation,
                "max_contraction_error": r.max_contraction_error,
                "variance_monotone": r.variance_monotone,
                "max_excursions": r.max_excursions,
            })
        })
        .collect();
    write_json(
        &summary,
        &serde_json::json!({
            "histogram": { "bins": HISTOGRAM_BINS, "range": histogram_range(Interval::symmetric_unit()) },
            "contraction_per_step": cfg.dt * cfg.kernel_gain,
            "series": summaries,
            "runs": run_meta,
        }),
    )?;
    let mut files = vec![index, summary];
    files.extend(runs.iter().filter_map(|r| r.directory.clone()));
    Ok(files)
}
