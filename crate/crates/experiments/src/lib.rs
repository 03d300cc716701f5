//! Batch experiments for mean-field MPC. Each subcommand has a module here;
//! every run writes plot-ready CSV/JSON plus a `manifest.json` into its output
//! directory.

pub mod alpha_surface;
pub mod config;
pub mod cost_compare;
pub mod error;
pub mod evolve;
pub mod output;
pub mod seeds;
pub mod verify_bound;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig};
pub use error::{ExperimentError, Result};

/// Runs the configured experiment, then writes `manifest.json`.
/// Returns the manifest path followed by every output it lists.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let clock = output::RunClock::start();
    let files = match cfg.experiment {
        Experiment::AlphaSurface => alpha_surface::run_alpha_surface(cfg)?,
        Experiment::CostCompare => cost_compare::run_cost_compare(cfg)?,
        Experiment::ParticleEvolution => evolve::run_particle_evolution(cfg)?,
        Experiment::VerifyBound => verify_bound::run_verify_bound(cfg)?,
    };
    let relative: Vec<PathBuf> = files
        .iter()
        .map(|f| {
            f.strip_prefix(&cfg.output_dir)
                .map(PathBuf::from)
                .unwrap_or_else(|_| f.clone())
        })
        .collect();
    let manifest = cfg.output_dir.join("manifest.json");
    output::write_json(&manifest, &clock.manifest(cfg, relative))?;
    let mut all = vec![manifest];
    all.extend(files);
    Ok(all)
}
