//! Command-line front end: generate and validate traces, fit calibrators,
//! sweep thresholds and write reports.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

#[derive(Debug, Parser)]
#[command(name = "hgn", version, about = "Edge/cloud grasp offloading simulator")]
pub struct Cli {
    /// Key/value file mirroring the flags; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trace from a preset or explicit parameters.
    Synth(SynthArgs),
    /// Check a trace file and report every violation.
    Validate(TraceArg),
    /// Fit a calibrator (or apply a saved one) and write the calibrated trace.
    Calibrate(CalibrateArgs),
    /// Reliability bins and ECE for one object split.
    Reliability(ReliabilityArgs),
    /// Decision metrics across a threshold grid.
    Sweep(SweepArgs),
    /// Operating points, scenarios, UII and Pareto front per method.
    Report(ReportArgs),
    /// Mark the non-dominated rows of operating-point CSVs.
    Pareto(ParetoArgs),
}

#[derive(Debug, Args)]
pub struct TraceArg {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// One of: unseen-only, seen, mix-80-20, sharpened, calibrated.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of seen records in `mix-80-20`.
    #[arg(long, default_value_t = 0.8)]
    pub mix_seen_fraction: f64,
    #[arg(long, conflicts_with = "preset")]
    pub edge_acc: Option<f64>,
    #[arg(long, conflicts_with = "preset")]
    pub cloud_acc: Option<f64>,
    #[arg(long, conflicts_with = "preset")]
    pub num_classes: Option<usize>,
    /// Exponent applied to the probability vectors; above 1 is overconfident.
    #[arg(long, conflicts_with = "preset")]
    pub sharpen: Option<f64>,
    /// Beta concentration of the confidence distributions.
    #[arg(long, conflicts_with = "preset")]
    pub concentration: Option<f64>,
    #[arg(long, conflicts_with = "preset")]
    pub feature_dim: Option<usize>,
    /// Output trace file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct FitArgs {
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Share of records used for fitting; the rest is evaluated.
    #[arg(long, default_value_t = 0.5)]
    pub fit_split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Regularisation weight for Dirichlet calibration.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// Neighbours used by density-aware calibration.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args, Clone)]
pub struct EvalArgs {
    /// Threshold grid: `start:stop:step` or a comma list.
    #[arg(long, default_value = "0:1:0.05")]
    pub grid: String,
    #[arg(long, default_value_t = 50.0)]
    pub rtt_ms: f64,
    #[arg(long, default_value_t = 150.0)]
    pub deadline_ms: f64,
    /// Penalties for S1..S5.
    #[arg(long, default_value = "0,1,5,6,7")]
    pub penalties: String,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// none, ts, dc, dac or hist.
    #[arg(long, default_value = "ts")]
    pub method: String,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Apply a saved model to the whole trace instead of fitting.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReliabilityArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Which records to bin: seen, unseen or all.
    #[arg(long)]
    pub tag: String,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[arg(long, default_value = "0:1:0.05")]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// Comma-separated calibration methods to compare.
    #[arg(long, default_value = "none,ts,dc")]
    pub method: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Operating-point CSV files (repeat or comma-separate).
    #[arg(long, value_name = "FILE", value_delimiter = ',', required = true)]
    pub points: Vec<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

/// Attaches the offending flag to a core error.
pub(crate) fn flag<T>(r: hgn_core::Result<T>, name: &str) -> Result<T> {
    r.with_context(|| format!("invalid {name}"))
}

pub(crate) fn load_trace(path: &Path) -> Result<hgn_core::Trace> {
    hgn_core::Trace::load(path).with_context(|| format!("--trace {}", path.display()))
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .with_context(|| format!("--out: cannot write {}", path.display()))?;
    Ok(path)
}

pub(crate) fn out_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("--out: {} is not a directory", dir.display());
    }
    std::fs::create_dir_all(dir).with_context(|| format!("--out: cannot create {}", dir.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Reliability(a) => commands::reliability(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Report(a) => commands::report(&a),
        Command::Pareto(a) => commands::pareto(&a),
    }
}
