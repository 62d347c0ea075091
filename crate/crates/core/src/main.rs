use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlqmc_evp::cli::{compare, convergence_study, run_experiment, ExperimentConfig, RunOutcome};

#[derive(Parser)]
#[command(version, about = "Multilevel QMC estimation of smallest eigenvalues")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true, env = "MLQMC_OUT")]
    out: Option<PathBuf>,
    /// Random seed for the shifts (overrides the configuration).
    #[arg(long, global = true, env = "MLQMC_SEED")]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the configured estimator over its tolerance sweep.
    Run,
    /// Eigenvalue convergence under mesh refinement.
    Study,
    /// MC, QMC, MLMC and MLQMC at equal tolerances.
    Compare,
}

fn load(args: &Args) -> mlqmc_evp::Result<ExperimentConfig> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| mlqmc_evp::Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report(outcome: &RunOutcome) {
    for r in &outcome.reports {
        println!(
            "{:>6} eps={:<10} L={} estimate={:.10} sd={:.3e} solves={} achieved={}",
            r.estimator.to_string(),
            r.tolerance.map_or("-".to_string(), |t| t.to_string()),
            r.levels.len().saturating_sub(1),
            r.estimate,
            r.total_variance.sqrt(),
            r.total_solves,
            if r.tolerance.is_some() {
                r.tolerance_achieved.to_string()
            } else {
                "-".into()
            }
        );
    }
    for (eps, why) in &outcome.failures {
        eprintln!("eps={eps}: {why}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match args.command {
        Command::Run => run_experiment(&cfg).map(|o| {
            report(&o);
            o.success()
        }),
        Command::Compare => compare(&cfg).map(|o| {
            report(&o);
            o.success()
        }),
        Command::Study => convergence_study(&cfg).map(|o| {
            for r in &o.rows {
                println!(
                    "h={:<10} lambda_h={:.10} error={:.3e}",
                    r.h, r.lambda_h, r.error_estimate
                );
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&o.rates).unwrap_or_default()
            );
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
