use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfmpc_experiments::{run, Experiment, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "mfmpc", version = mfmpc_experiments::output::VERSION, about = "Mean-field MPC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// α_N from the closed form and the LP over a (ν, N) grid
    AlphaSurface(Common),
    /// Closed-loop MPC cost against the horizon-T optimum
    CostCompare(Common),
    /// Particle ensembles under closed-loop MPC
    Evolve(Common),
    /// Controllability inequalities along the closed loop
    VerifyBound(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file (or a previous manifest.json) overriding the preset
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(experiment: Experiment, args: Common) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut cfg = ExperimentConfig::load(experiment, args.config.as_deref())?;
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(ExperimentError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    run(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::AlphaSurface(a) => (Experiment::AlphaSurface, a),
        Command::CostCompare(a) => (Experiment::CostCompare, a),
        Command::Evolve(a) => (Experiment::ParticleEvolution, a),
        Command::VerifyBound(a) => (Experiment::VerifyBound, a),
    };
    match execute(experiment, args) {
        Ok(files) => {
            println!("{}", files[0].display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
