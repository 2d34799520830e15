// SPDX-License-Identifier: MIT OR Apache-2.0

//! `tsbreak`: simulate piecewise VAR data, fit the group fused lasso over a
//! list of penalties, and re-threshold stored fits.

mod config;
mod data;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tsbreak_core::segment::segment_with_progress;
use tsbreak_core::simulate::{simulate_break_var, BreakVarSpec, SimulationSettings};

use crate::config::{parse_json, parse_lambda_list, ConfigFile, LambdaList, Lambdas};
use crate::report::{DataInfo, FitRecord, NormView, Report, SCHEMA_VERSION, TIME_CONVENTION};

const PROGRESS_EVERY: usize = 50;

#[derive(Parser)]
#[command(
    name = "tsbreak",
    version,
    about = "Structural breaks in vector autoregressions"
)]
struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "TSBREAK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a piecewise VAR series from a JSON spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model for each lambda and write a JSON report.
    Fit(FitArgs),
    /// Re-threshold the norms stored in a report.
    Detect {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        threshold: f64,
    },
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON file with any of: lambda, rho, lag, eps_abs, eps_rel, max_iter,
    /// detect_threshold, seed, adaptive_rho.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated penalties, e.g. `1,3,5`.
    #[arg(long, value_parser = parse_lambda_list)]
    lambda: Option<LambdaList>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    detect_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    adaptive_rho: bool,
    /// Report path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress lines on standard error.
    #[arg(long, short)]
    quiet: bool,
}

impl FitArgs {
    fn flags(&self) -> ConfigFile {
        ConfigFile {
            lambda: self.lambda.clone().map(|l| Lambdas::Many(l.0)),
            rho: self.rho,
            lag: self.lag,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            max_iter: self.max_iter,
            detect_threshold: self.detect_threshold,
            seed: self.seed,
            adaptive_rho: self.adaptive_rho.then_some(true),
        }
    }
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    schema_version: u32,
    data: String,
    seed: u64,
    /// Last time step of each regime before a break.
    break_times: &'a [usize],
    /// First time step of each new regime, as `fit` reports breakpoints.
    regime_starts: Vec<usize>,
    spec: &'a BreakVarSpec,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn cmd_simulate(spec_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("cannot read {}", spec_path.display()))?;
    let settings: SimulationSettings =
        parse_json(&text).with_context(|| format!("invalid spec {}", spec_path.display()))?;
    let spec = settings
        .resolve()
        .with_context(|| format!("invalid spec {}", spec_path.display()))?;
    let series = simulate_break_var(&spec)?;
    data::write_series(out, &series)?;

    let meta = SimulationMeta {
        schema_version: SCHEMA_VERSION,
        data: out.display().to_string(),
        seed: spec.seed,
        break_times: &spec.break_times,
        regime_starts: spec.break_times.iter().map(|b| b + 1).collect(),
        spec: &spec,
    };
    let meta_path = sidecar_path(out);
    let file = std::fs::File::create(&meta_path)
        .with_context(|| format!("cannot write {}", meta_path.display()))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &meta)?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let base = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let config = base.overlay(args.flags()).resolve()?;
    let series = data::read_series(&args.data)?;
    series.check_lag(config.lag)?;

    let mut fits = Vec::with_capacity(config.lambdas.len());
    for &lambda in &config.lambdas {
        let solver = config.solver(lambda);
        let quiet = args.quiet;
        let result = segment_with_progress(&series, &solver, |info| {
            if !quiet && info.iteration % PROGRESS_EVERY == 0 {
                eprintln!(
                    "lambda={lambda} iter={} primal={:.3e} (eps {:.3e}) dual={:.3e} (eps {:.3e}) rho={}",
                    info.iteration, info.primal_residual, info.eps_primal, info.dual_residual, info.eps_dual, info.rho
                );
            }
        })?;
        if !quiet {
            eprintln!(
                "lambda={lambda} done: {} iterations, converged={}, breakpoints={:?}",
                result.iterations, result.converged, result.breakpoints
            );
        }
        fits.push(FitRecord::from_result(&result));
    }

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        time_convention: TIME_CONVENTION.to_string(),
        data: DataInfo {
            path: args.data.display().to_string(),
            n_times: series.n_times(),
            dim: series.dim(),
        },
        config,
        fits,
    };
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &report)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn cmd_detect(report_path: &Path, threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        bail!("threshold must be positive, got {threshold}");
    }
    let text = std::fs::read_to_string(report_path)
        .with_context(|| format!("cannot read {}", report_path.display()))?;
    let view: NormView =
        parse_json(&text).with_context(|| format!("malformed report {}", report_path.display()))?;
    if view.schema_version != SCHEMA_VERSION {
        bail!(
            "report schema version {} is not supported (expected {SCHEMA_VERSION})",
            view.schema_version
        );
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "lambda\tbreakpoint")?;
    for (i, fit) in view.fits.iter().enumerate() {
        if fit.norm_times.len() != fit.norms.len() {
            bail!("fits[{i}]: norm_times and norms differ in length");
        }
        for b in fit.breakpoints(threshold) {
            writeln!(out, "{}\t{b}", fit.lambda)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    match &cli.command {
        Command::Simulate { spec, out } => cmd_simulate(spec, out),
        Command::Fit(args) => cmd_fit(args),
        Command::Detect { report, threshold } => cmd_detect(report, *threshold),
    }
}
