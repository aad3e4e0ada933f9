use serde::{Deserialize, Serialize};

use super::optimize::golden_section;
use super::{log_probs, softmax_scaled, CalibrationModel, Calibrator, FitConfig, Fitted};
use crate::error::{HgnError, Result};
use crate::trace::Trace;

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
pub const T_TOL: f64 = 1e-4;

/// Single temperature shared by every class: `softmax(ln p / T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    pub temperature: f64,
}

impl TemperatureModel {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(HgnError::param(
                "temperature",
                format!("{temperature} must be positive"),
            ));
        }
        Ok(TemperatureModel { temperature })
    }

    pub fn apply(&self, probs: &[f64]) -> Vec<f64> {
        softmax_scaled(&log_probs(probs), 1.0 / self.temperature)
    }
}

/// Mean NLL of `softmax(logs / t)` against `labels`.
pub(crate) fn nll_at_temperature(logs: &[Vec<f64>], labels: &[usize], t: f64) -> f64 {
    let beta = 1.0 / t;
    let total: f64 = logs
        .iter()
        .zip(labels)
        .map(|(l, &y)| {
            let m = l.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b * beta));
            let lse = m + l.iter().map(|&x| (x * beta - m).exp()).sum::<f64>().ln();
            lse - l[y] * beta
        })
        .sum();
    total / logs.len() as f64
}

pub(crate) fn cal_arrays(cal: &Trace) -> (Vec<Vec<f64>>, Vec<usize>) {
    (
        cal.records
            .iter()
            .map(|r| log_probs(&r.edge_probs))
            .collect(),
        cal.records.iter().map(|r| r.ground_truth).collect(),
    )
}

/// Fits the temperature by golden-section search on `[T_MIN, T_MAX]`.
pub fn fit_temperature(cal: &Trace) -> Result<Fitted> {
    if cal.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let (logs, labels) = cal_arrays(cal);
    let m = golden_section(
        |t| nll_at_temperature(&logs, &labels, t),
        T_MIN,
        T_MAX,
        T_TOL,
    );
    let mut notes = Vec::new();
    if m.x - T_MIN <= T_TOL || T_MAX - m.x <= T_TOL {
        notes.push(format!("temperature {} at search boundary", m.x));
    }
    Ok(Fitted {
        model: CalibrationModel::Temperature(TemperatureModel::new(m.x)?),
        iterations: m.iterations,
        converged: m.converged,
        notes,
    })
}

pub struct TemperatureScaling;

impl Calibrator for TemperatureScaling {
    fn name(&self) -> &'static str {
        "ts"
    }

    fn summary(&self) -> &'static str {
        "temperature scaling: one shared temperature fitted by NLL"
    }

    fn fit_model(&self, cal: &Trace, _cfg: &FitConfig) -> Result<Fitted> {
        fit_temperature(cal)
    }
}
