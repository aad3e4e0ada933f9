use serde::{Deserialize, Serialize};

use super::{CalibrationModel, Calibrator, FitConfig, Fitted};
use crate::error::{HgnError, Result};
use crate::reliability::{bin_edge, bin_unchecked};
use crate::trace::{argmax, Trace};

/// Top-label histogram binning: the top confidence is replaced by the
/// empirical accuracy of its bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    pub bins: usize,
    /// Remapped confidence per bin.
    pub remap: Vec<f64>,
}

impl HistogramModel {
    pub fn remapped(&self, conf: f64) -> f64 {
        self.remap[bin_unchecked(conf.clamp(0.0, 1.0), self.bins)]
    }

    /// Replaces the top entry with its bin's remapped value and rescales the
    /// other entries proportionally. The remapped value is floored just above
    /// `1/C`, and when a rescaled entry would reach it the remaining mass is
    /// spread evenly instead, so the predicted class never changes.
    pub fn apply(&self, probs: &[f64]) -> Vec<f64> {
        let c = probs.len();
        if c < 2 {
            return vec![1.0; c];
        }
        let (top, conf) = argmax(probs);
        let r = self.remapped(conf).max(1.0 / c as f64 + 1e-9).min(1.0);
        let rest = 1.0 - r;
        let old_rest = 1.0 - conf;
        let mut out: Vec<f64> = if old_rest > 0.0 {
            probs.iter().map(|p| p * rest / old_rest).collect()
        } else {
            vec![rest / (c - 1) as f64; c]
        };
        out[top] = r;
        if out.iter().enumerate().any(|(i, &p)| i != top && p >= r) {
            out = vec![rest / (c - 1) as f64; c];
            out[top] = r;
        }
        out
    }
}

pub fn fit_histogram(cal: &Trace, bins: usize) -> Result<Fitted> {
    if bins == 0 {
        return Err(HgnError::param("bins", "must be at least 1"));
    }
    let mut correct = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for r in &cal.records {
        let (pred, conf) = r.edge_top();
        let k = bin_unchecked(conf, bins);
        count[k] += 1;
        if pred == r.ground_truth {
            correct[k] += 1;
        }
    }
    let remap = (0..bins)
        .map(|k| {
            if count[k] == 0 {
                0.5 * (bin_edge(k, bins) + bin_edge(k + 1, bins))
            } else {
                correct[k] as f64 / count[k] as f64
            }
        })
        .collect();
    Ok(Fitted {
        model: CalibrationModel::Histogram(HistogramModel { bins, remap }),
        iterations: 1,
        converged: true,
        notes: Vec::new(),
    })
}

pub struct HistogramBinning;

impl Calibrator for HistogramBinning {
    fn name(&self) -> &'static str {
        "hist"
    }

    fn summary(&self) -> &'static str {
        "histogram binning over the top confidence (baseline)"
    }

    fn fit_model(&self, cal: &Trace, cfg: &FitConfig) -> Result<Fitted> {
        if cal.is_empty() {
            return Err(HgnError::EmptyTrace);
        }
        fit_histogram(cal, cfg.bins)
    }
}
