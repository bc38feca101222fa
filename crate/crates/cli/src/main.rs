//! Batch experiment runner: configuration, caching, seeding, and result
//! emission for the zero-current laboratory.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 config error, 3 numeric
//! failure.

mod config;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::load_config;
use crate::stages::{
    build_context, stage_assumptions, stage_bergman, stage_exceptions, stage_growth, stage_rate,
    stage_report, stage_sample, stage_zeros, StageError,
};

#[derive(Parser)]
#[command(name = "zerocurrents", about = "Zero-current equidistribution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config file (flat key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override (defaults to the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (or ZEROCURRENTS_OUT; defaults to ./out/<name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker thread count (defaults to available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Grid resolution override.
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order and write the aggregate report.
    Run,
    /// Two-sided Bergman bound and curvature-convergence verification tables.
    Assumptions,
    /// Bergman kernel tables (dimension identities, conditioning).
    Bergman,
    /// Ensemble diagnostics (moderate moments, Holder modulus, audit log).
    Sample,
    /// Zero-set solve summaries (counts, residuals, rejections).
    Zeros,
    /// Discrepancy statistics and rate fits.
    Rate,
    /// Exception-set exceedance frequencies.
    Exceptions,
    /// Dimension growth and intermediate degree tables.
    Growth,
    /// Aggregate stage summaries into report.json.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zerocurrents: {e}");
            let code = match e {
                StageError::Assertion(_) => 1u8,
                StageError::Config(_) => 2,
                StageError::Numeric(_) => 3,
                StageError::Io(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), StageError> {
    let config_path = cli
        .config
        .ok_or_else(|| StageError::Config("--config is required".into()))?;
    let mut cfg = load_config(&config_path).map_err(|e| StageError::Config(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(res) = cli.resolution {
        cfg.resolution = res;
    }
    let out_dir = cli
        .out
        .or_else(|| std::env::var("ZEROCURRENTS_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));

    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| StageError::Config(format!("worker pool: {e}")))?;
    }

    let ctx = build_context(cfg, &out_dir)?;
    match cli.command {
        Command::Run => {
            let a = stage_assumptions(&ctx)?;
            println!(
                "assumptions: M0 = {:.6}, pass = {}",
                a.m0_estimate,
                a.bergman_bounds_pass && a.curvature_convergence_pass
            );
            let b = stage_bergman(&ctx)?;
            println!(
                "bergman: max dim defect {:.3e}, pass = {}",
                b.max_dimension_defect, b.pass
            );
            let s = stage_sample(&ctx)?;
            println!("sample: family {}, pass = {}", s.family, s.pass);
            let z = stage_zeros(&ctx)?;
            println!(
                "zeros: {} accepted / {} rejected, counts exact = {}, max residual {:.3e}",
                z.total_samples, z.total_rejected, z.counts_exact, z.max_residual
            );
            let r = stage_rate(&ctx)?;
            println!(
                "rate: slope {:.4}, C stability {:.4}, pass = {}",
                r.slope_logterm, r.c_stability_logterm, r.pass
            );
            let e = stage_exceptions(&ctx)?;
            println!(
                "exceptions: freqs {:?}, alpha_hat {:?}, pass = {}",
                e.frequencies, e.alpha_hat, e.pass
            );
            let g = stage_growth(&ctx)?;
            println!("growth: C3 = {:.4}, pass = {}", g.c3, g.pass);
            let rep = stage_report(&ctx)?;
            println!("report: all_pass = {}", rep.all_pass);
            gate(rep.all_pass)
        }
        Command::Assumptions => {
            let a = stage_assumptions(&ctx)?;
            println!(
                "M0 = {:.6} (trend {:.4}); Bergman bounds pass = {}; curvature convergence pass = {}",
                a.m0_estimate, a.m0_trend_slope, a.bergman_bounds_pass, a.curvature_convergence_pass
            );
            gate(a.bergman_bounds_pass && a.curvature_convergence_pass)
        }
        Command::Bergman => {
            let b = stage_bergman(&ctx)?;
            println!(
                "max dimension defect {:.3e}; max condition {:.3e}",
                b.max_dimension_defect, b.max_condition
            );
            gate(b.pass)
        }
        Command::Sample => {
            let s = stage_sample(&ctx)?;
            println!(
                "family {}; moderate moments finite = {}; Holder modulus {:.4}",
                s.family, s.moderate_finite, s.holder_modulus
            );
            gate(s.pass)
        }
        Command::Zeros => {
            let z = stage_zeros(&ctx)?;
            println!(
                "{} accepted / {} rejected; counts exact = {}; max residual {:.3e}",
                z.total_samples, z.total_rejected, z.counts_exact, z.max_residual
            );
            gate(z.pass)
        }
        Command::Rate => {
            let r = stage_rate(&ctx)?;
            println!(
                "slope (log term) {:.4}; fitted C {:.4}; stability {:.4}",
                r.slope_logterm, r.c_fit_logterm, r.c_stability_logterm
            );
            gate(r.pass)
        }
        Command::Exceptions => {
            let e = stage_exceptions(&ctx)?;
            println!(
                "frequencies {:?}; nonincreasing = {}; alpha_hat {:?}",
                e.frequencies, e.nonincreasing, e.alpha_hat
            );
            gate(e.pass)
        }
        Command::Growth => {
            let g = stage_growth(&ctx)?;
            println!(
                "C3 = {:.4}; converged(1%) = {}; jet bound ok = {}",
                g.c3, g.converged_1pct, g.jet_bound_ok
            );
            gate(g.pass)
        }
        Command::Report => {
            let rep = stage_report(&ctx)?;
            println!("all_pass = {}", rep.all_pass);
            gate(rep.all_pass)
        }
    }
}

fn gate(pass: bool) -> Result<(), StageError> {
    if pass {
        Ok(())
    } else {
        Err(StageError::Assertion("stage pass flag is false".into()))
    }
}
