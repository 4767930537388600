use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use moderate_core::harness::{run_convergence_study, ExperimentConfig, StudyOptions};
use moderate_core::{io, LabError};

/// Coupled particle / SPDE convergence study.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "preset"]))]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_parser = ["burgers1d", "navier-stokes-2d", "keller-segel-2d"])]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    dump_particles: bool,
    #[arg(long)]
    dump_fields: bool,
}

fn run(cli: &Cli) -> Result<(), LabError> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| LabError::InvalidInput(format!("thread pool: {e}")))?;
    }
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let cfg = cfg.validated()?;
    let opts = StudyOptions {
        record_snapshots: cli.dump_fields || cli.dump_particles,
    };
    let outcome = run_convergence_study(&cfg, &opts)?;
    io::write_study(&cli.out, &cfg, &outcome)?;
    io::write_dumps(&cli.out, &cfg, &outcome, cli.dump_fields, cli.dump_particles)?;
    let r = &outcome.report;
    println!(
        "slope {:.4} (90% CI {:.4} .. {:.4}), predicted kappa {:.4}; results in {}",
        r.fit.slope,
        r.fit.slope_ci.0,
        r.fit.slope_ci.1,
        r.kappa_predicted,
        cli.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
