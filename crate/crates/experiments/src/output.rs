use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;

pub use mfmpc::scalar::fmt17;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("MFMPC_GIT_DESCRIBE"));

/// Formats an optional float; `None` becomes an empty CSV field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Records what ran and how; written last, next to the outputs.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub config: &'a ExperimentConfig,
    pub files: Vec<PathBuf>,
}

pub struct RunClock {
    started: SystemTime,
    timer: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        Self {
            started: SystemTime::now(),
            timer: Instant::now(),
        }
    }

    pub fn manifest<'a>(&self, config: &'a ExperimentConfig, files: Vec<PathBuf>) -> Manifest<'a> {
        Manifest {
            tool: "mfmpc",
            version: VERSION,
            experiment: config.experiment.subcommand(),
            seed: config.seed,
            threads: rayon::current_num_threads(),
            started_unix_seconds: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_seconds: self.timer.elapsed().as_secs_f64(),
            config,
            files,
        }
    }
}
