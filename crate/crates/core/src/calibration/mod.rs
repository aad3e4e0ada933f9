//! Post-hoc confidence calibration.
//!
//! Every method implements [`Calibrator`] and is looked up by name through a
//! [`CalibratorRegistry`]. Fitting produces a [`CalibrationModel`], a plain
//! serialisable value that can be saved, reloaded and applied to other traces.
//!
//! All transforms work on `ln(max(p, 1e-12))` since traces carry
//! probabilities rather than logits.

pub mod density;
pub mod dirichlet;
pub mod histogram;
pub mod optimize;
pub mod temperature;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HgnError, Result};
use crate::reliability::{trace_ece, DEFAULT_BINS};
use crate::trace::Trace;

pub use density::{DensityAwareCalibration, DensityAwareModel};
pub use dirichlet::{DirichletCalibration, DirichletModel};
pub use histogram::{HistogramBinning, HistogramModel};
pub use temperature::{TemperatureModel, TemperatureScaling};

pub const PROB_FLOOR: f64 = 1e-12;

pub fn log_probs(probs: &[f64]) -> Vec<f64> {
    probs.iter().map(|p| p.max(PROB_FLOOR).ln()).collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    softmax_scaled(z, 1.0)
}

/// `softmax(scale * z)`, computed stably.
pub fn softmax_scaled(z: &[f64], scale: f64) -> Vec<f64> {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v * scale));
    let e: Vec<f64> = z.iter().map(|&v| (v * scale - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean negative log-likelihood of the ground truth under the edge
/// probabilities, floored at [`PROB_FLOOR`].
pub fn nll(trace: &Trace) -> Result<f64> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let total: f64 = trace
        .records
        .iter()
        .map(|r| -r.edge_probs[r.ground_truth].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / trace.len() as f64)
}

/// A fitted confidence transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CalibrationModel {
    Identity,
    Temperature(TemperatureModel),
    Dirichlet(DirichletModel),
    DensityAware(DensityAwareModel),
    Histogram(HistogramModel),
}

impl CalibrationModel {
    pub fn variant_name(&self) -> &'static str {
        match self {
            CalibrationModel::Identity => "identity",
            CalibrationModel::Temperature(_) => "temperature",
            CalibrationModel::Dirichlet(_) => "dirichlet",
            CalibrationModel::DensityAware(_) => "density_aware",
            CalibrationModel::Histogram(_) => "histogram",
        }
    }

    pub fn apply(&self, probs: &[f64], features: Option<&[f64]>) -> Result<Vec<f64>> {
        match self {
            CalibrationModel::Identity => Ok(probs.to_vec()),
            CalibrationModel::Temperature(m) => Ok(m.apply(probs)),
            CalibrationModel::Dirichlet(m) => m.apply(probs),
            CalibrationModel::DensityAware(m) => {
                let f = features.ok_or_else(|| HgnError::MissingFeatures {
                    sample_id: "<unnamed>".into(),
                })?;
                m.apply(probs, f)
            }
            CalibrationModel::Histogram(m) => Ok(m.apply(probs)),
        }
    }

    /// Returns a new trace with every record's `edge_probs` transformed.
    pub fn apply_trace(&self, trace: &Trace) -> Result<Trace> {
        let records = trace
            .records
            .par_iter()
            .map(|r| {
                let probs =
                    self.apply(&r.edge_probs, r.features.as_deref())
                        .map_err(|e| match e {
                            HgnError::MissingFeatures { .. } => HgnError::MissingFeatures {
                                sample_id: r.sample_id.clone(),
                            },
                            other => other,
                        })?;
                let mut out = r.clone();
                out.edge_probs = probs;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(trace.with_records(records))
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises") + "\n"
    }

    pub fn from_text(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HgnError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Knobs shared by all calibrators; each method reads what it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub bins: usize,
    pub dc_lambda: f64,
    pub dac_k: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            bins: DEFAULT_BINS,
            dc_lambda: dirichlet::DEFAULT_LAMBDA,
            dac_k: density::DEFAULT_K,
        }
    }
}

/// Raw output of a calibrator's fitting routine.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: CalibrationModel,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub method: String,
    /// NLL on the fitting split before and after the transform.
    pub nll_before: f64,
    pub nll_after: f64,
    /// ECE before and after; on the fitting split from [`fit`], on the
    /// evaluation split from [`calibrate_trace`].
    pub ece_before: f64,
    pub ece_after: f64,
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

pub trait Calibrator: Send + Sync {
    /// Registry key, also used on the command line.
    fn name(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn requires_features(&self) -> bool {
        false
    }

    fn fit_model(&self, cal: &Trace, cfg: &FitConfig) -> Result<Fitted>;
}

pub struct Uncalibrated;

impl Calibrator for Uncalibrated {
    fn name(&self) -> &'static str {
        "none"
    }

    fn summary(&self) -> &'static str {
        "identity: confidences are used as produced"
    }

    fn fit_model(&self, _cal: &Trace, _cfg: &FitConfig) -> Result<Fitted> {
        Ok(Fitted {
            model: CalibrationModel::Identity,
            iterations: 0,
            converged: true,
            notes: Vec::new(),
        })
    }
}

#[derive(Default)]
pub struct CalibratorRegistry {
    entries: BTreeMap<&'static str, Box<dyn Calibrator>>,
}

impl CalibratorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `none`, `ts`, `dc`, `dac` and `hist`.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Box::new(Uncalibrated));
        r.register(Box::new(TemperatureScaling));
        r.register(Box::new(DirichletCalibration));
        r.register(Box::new(DensityAwareCalibration));
        r.register(Box::new(HistogramBinning));
        r
    }

    /// Adds a calibrator, replacing any previous one with the same name.
    pub fn register(&mut self, calibrator: Box<dyn Calibrator>) {
        self.entries.insert(calibrator.name(), calibrator);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Calibrator> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| HgnError::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

/// Fits `calibrator` on `cal` and reports NLL and ECE on that same split.
pub fn fit(
    calibrator: &dyn Calibrator,
    cal: &Trace,
    cfg: &FitConfig,
) -> Result<(CalibrationModel, FitReport)> {
    if cal.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    if calibrator.requires_features() {
        if let Some(r) = cal.records.iter().find(|r| r.features.is_none()) {
            return Err(HgnError::MissingFeatures {
                sample_id: r.sample_id.clone(),
            });
        }
    }
    let fitted = calibrator.fit_model(cal, cfg)?;
    let after = fitted.model.apply_trace(cal)?;
    let report = FitReport {
        method: calibrator.name().to_string(),
        nll_before: nll(cal)?,
        nll_after: nll(&after)?,
        ece_before: trace_ece(cal, cfg.bins)?,
        ece_after: trace_ece(&after, cfg.bins)?,
        iterations: fitted.iterations,
        converged: fitted.converged,
        notes: fitted.notes,
    };
    Ok((fitted.model, report))
}

/// Output of [`calibrate_trace`].
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub model: CalibrationModel,
    pub report: FitReport,
    /// The evaluation split with transformed `edge_probs`, in original order.
    pub calibrated: Trace,
    /// The evaluation split as it was before calibration.
    pub uncalibrated: Trace,
}

/// Splits `trace` by seeded shuffle, fits on the first `fit_split` share and
/// transforms the remainder. The input is left untouched.
pub fn calibrate_trace(
    trace: &Trace,
    calibrator: &dyn Calibrator,
    cfg: &FitConfig,
    fit_split: f64,
    seed: u64,
) -> Result<CalibrationRun> {
    if !(fit_split > 0.0 && fit_split < 1.0) {
        return Err(HgnError::param(
            "fit_split",
            format!("{fit_split} must be strictly between 0 and 1"),
        ));
    }
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let (cal, eval) = trace.seeded_split(fit_split, seed);
    if eval.is_empty() {
        return Err(HgnError::param(
            "fit_split",
            "leaves no records for evaluation",
        ));
    }
    let (model, mut report) = fit(calibrator, &cal, cfg)?;
    let calibrated = model.apply_trace(&eval)?;
    report.ece_before = trace_ece(&eval, cfg.bins)?;
    report.ece_after = trace_ece(&calibrated, cfg.bins)?;
    let mut calibrated = calibrated;
    calibrated
        .metadata
        .insert("calibration".into(), calibrator.name().into());
    Ok(CalibrationRun {
        model,
        report,
        calibrated,
        uncalibrated: eval,
    })
}
