//! Experiment configuration: per-experiment presets overridden by a flat
//! key-value file (TOML, or the `config` object of a previous run manifest).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    AlphaSurface,
    CostCompare,
    ParticleEvolution,
    VerifyBound,
}

impl Experiment {
    pub fn subcommand(self) -> &'static str {
        match self {
            Experiment::AlphaSurface => "alpha-surface",
            Experiment::CostCompare => "cost-compare",
            Experiment::ParticleEvolution => "evolve",
            Experiment::VerifyBound => "verify-bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Regularization values `ν`.
    pub nu: Vec<f64>,
    /// Horizon range `n_min..=n_max`.
    pub n_min: usize,
    pub n_max: usize,
    /// Closed-loop length / truncation horizon.
    pub t: usize,
    /// Particle count.
    pub m: usize,
    pub dt: f64,
    pub kernel_gain: f64,
    pub seed: u64,
    /// Initial mean for the reduced-system experiments.
    pub y0: f64,
    /// Add an `N = T` row to the cost comparison.
    pub include_full_horizon: bool,
    pub output_dir: PathBuf,
}

/// Every field optional; used to overlay a file onto a preset.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    experiment: Option<Experiment>,
    nu: Option<Vec<f64>>,
    n_min: Option<usize>,
    n_max: Option<usize>,
    t: Option<usize>,
    m: Option<usize>,
    dt: Option<f64>,
    kernel_gain: Option<f64>,
    seed: Option<u64>,
    y0: Option<f64>,
    include_full_horizon: Option<bool>,
    output_dir: Option<PathBuf>,
}

pub const MAX_HORIZON: usize = 200;

impl ExperimentConfig {
    pub fn preset(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            nu: vec![100.0],
            n_min: 2,
            n_max: 10,
            t: 100,
            m: 100_000,
            dt: 1.0,
            kernel_gain: 1.0,
            seed: 2024,
            y0: 1.0,
            include_full_horizon: true,
            output_dir: PathBuf::from("out").join(experiment.subcommand()),
        };
        match experiment {
            // ν = 10^(k/4), k = 0..12
            Experiment::AlphaSurface => Self {
                nu: (0..=12).map(|k| 10f64.powf(k as f64 / 4.0)).collect(),
                n_max: 30,
                ..base
            },
            Experiment::CostCompare => base,
            Experiment::ParticleEvolution => Self {
                nu: vec![100.0, 1000.0],
                kernel_gain: 0.05,
                ..base
            },
            Experiment::VerifyBound => Self {
                n_min: 5,
                n_max: 5,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.nu.is_empty() || self.nu.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad(format!(
                "nu values must be positive and finite, got {:?}",
                self.nu
            ));
        }
        if self.n_min < 2 || self.n_max > MAX_HORIZON || self.n_min > self.n_max {
            return bad(format!(
                "horizon range {}..={} must lie within [2, {MAX_HORIZON}]",
                self.n_min, self.n_max
            ));
        }
        if self.t == 0 {
            return bad("t must be at least 1".into());
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.kernel_gain >= 0.0 && self.kernel_gain.is_finite()) {
            return bad(format!(
                "kernel_gain must be nonnegative, got {}",
                self.kernel_gain
            ));
        }
        if !self.y0.is_finite() {
            return bad("y0 must be finite".into());
        }
        Ok(())
    }

    pub fn horizons(&self) -> impl Iterator<Item = usize> {
        self.n_min..=self.n_max
    }

    /// Preset for `experiment`, overridden by the file at `path` if given.
    pub fn load(experiment: Experiment, path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::preset(experiment);
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            let partial = parse_partial(&text, path)?;
            if let Some(kind) = partial.experiment {
                if kind != experiment {
                    return Err(ExperimentError::Config(format!(
                        "config is for `{}`, not `{}`",
                        kind.subcommand(),
                        experiment.subcommand()
                    )));
                }
            }
            cfg.apply(partial);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, p: PartialConfig) {
        macro_rules! overlay {
            ($($field:ident),*) => { $( if let Some(v) = p.$field { self.$field = v; } )* };
        }
        overlay!(
            nu,
            n_min,
            n_max,
            t,
            m,
            dt,
            kernel_gain,
            seed,
            y0,
            include_full_horizon,
            output_dir
        );
    }
}

fn parse_partial(text: &str, path: &Path) -> Result<PartialConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        // either a bare config object or a run manifest carrying one
        let value: serde_json::Value = serde_json::from_str(text)?;
        let inner = value.get("config").cloned().unwrap_or(value);
        return Ok(serde_json::from_value(inner)?);
    }
    Ok(toml::from_str(text)?)
}
