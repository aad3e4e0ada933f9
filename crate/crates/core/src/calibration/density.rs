//! Density-aware temperature scaling.
//!
//! Each sample gets its own temperature `T(x) = T0 + w * s(x)`, clamped to
//! `[T_MIN, T_MAX]`, where `s(x)` is the mean Euclidean distance from `x` to
//! its `k` nearest calibration features. Sparse regions (large `s`) can thus
//! be softened more than dense ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::golden_section;
use super::temperature::{cal_arrays, nll_at_temperature, T_MAX, T_MIN, T_TOL};
use super::{log_probs, softmax_scaled, CalibrationModel, Calibrator, FitConfig, Fitted};
use crate::error::{HgnError, Result};
use crate::trace::Trace;

pub const DEFAULT_K: usize = 10;
pub const JOINT_REL_TOL: f64 = 1e-5;
const MAX_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityAwareModel {
    pub t0: f64,
    pub w: f64,
    pub k: usize,
    /// Calibration-set features used for neighbour queries at inference time.
    pub reference: Vec<Vec<f64>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean distance from `x` to its `k` nearest points in `reference`, skipping
/// index `exclude` when given.
pub fn density_score(x: &[f64], reference: &[Vec<f64>], k: usize, exclude: Option<usize>) -> f64 {
    let mut d: Vec<f64> = reference
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(_, r)| sq_dist(x, r))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return 0.0;
    }
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    }
    let mut nearest = d[..k].to_vec();
    nearest.sort_by(|a, b| a.total_cmp(b));
    nearest.iter().map(|v| v.sqrt()).sum::<f64>() / k as f64
}

fn clamp_t(t: f64) -> f64 {
    t.clamp(T_MIN, T_MAX)
}

impl DensityAwareModel {
    pub fn feature_dim(&self) -> usize {
        self.reference.first().map_or(0, Vec::len)
    }

    pub fn temperature_for(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim() {
            return Err(HgnError::FeatureDimension {
                expected: self.feature_dim(),
                found: features.len(),
            });
        }
        let s = density_score(features, &self.reference, self.k, None);
        Ok(clamp_t(self.t0 + self.w * s))
    }

    pub fn apply(&self, probs: &[f64], features: &[f64]) -> Result<Vec<f64>> {
        let t = self.temperature_for(features)?;
        Ok(softmax_scaled(&log_probs(probs), 1.0 / t))
    }
}

fn features_of(cal: &Trace) -> Result<Vec<Vec<f64>>> {
    cal.records
        .iter()
        .map(|r| {
            r.features.clone().ok_or_else(|| HgnError::MissingFeatures {
                sample_id: r.sample_id.clone(),
            })
        })
        .collect()
}

fn nll_with_scores(logs: &[Vec<f64>], labels: &[usize], scores: &[f64], t0: f64, w: f64) -> f64 {
    let total: f64 = logs
        .iter()
        .zip(labels)
        .zip(scores)
        .map(|((l, &y), &s)| {
            let beta = 1.0 / clamp_t(t0 + w * s);
            let m = l.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x * beta));
            m + l.iter().map(|&x| (x * beta - m).exp()).sum::<f64>().ln() - l[y] * beta
        })
        .sum();
    total / logs.len() as f64
}

/// Fits `(T0, w)` by alternating golden-section searches. With `fixed_w`
/// only `T0` is searched.
pub fn fit_dac(cal: &Trace, k: usize, fixed_w: Option<f64>) -> Result<Fitted> {
    if cal.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let reference = features_of(cal)?;
    if k == 0 || k >= cal.len() {
        return Err(HgnError::param(
            "k",
            format!("{k} must be in 1..{}", cal.len()),
        ));
    }
    let scores: Vec<f64> = (0..reference.len())
        .into_par_iter()
        .map(|i| density_score(&reference[i], &reference, k, Some(i)))
        .collect();
    let (logs, labels) = cal_arrays(cal);
    let mut notes = Vec::new();

    let s_min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let identifiable = s_max - s_min > 1e-12;
    let fixed_w = match fixed_w {
        Some(w) => Some(w),
        None if !identifiable => {
            notes.push("density scores are constant; w is unidentifiable and pinned to 0".into());
            Some(0.0)
        }
        None => None,
    };

    let (t0, w, iterations, converged) = if let Some(w) = fixed_w {
        let m = golden_section(
            |t| nll_with_scores(&logs, &labels, &scores, t, w),
            T_MIN,
            T_MAX,
            T_TOL,
        );
        (m.x, w, m.iterations, m.converged)
    } else {
        let w_bound = T_MAX / s_max.max(1e-12);
        let w_tol = T_TOL / s_max.max(1e-12);
        let start = golden_section(
            |t| nll_at_temperature(&logs, &labels, t),
            T_MIN,
            T_MAX,
            T_TOL,
        );
        let (mut t0, mut w) = (start.x, 0.0);
        let mut f = start.fx;
        let mut iterations = start.iterations;
        let mut converged = false;
        for _ in 0..MAX_ROUNDS {
            let mw = golden_section(
                |v| nll_with_scores(&logs, &labels, &scores, t0, v),
                -w_bound,
                w_bound,
                w_tol,
            );
            if mw.fx <= f {
                w = mw.x;
            }
            let mt = golden_section(
                |t| nll_with_scores(&logs, &labels, &scores, t, w),
                T_MIN,
                T_MAX,
                T_TOL,
            );
            let f_new = nll_with_scores(&logs, &labels, &scores, mt.x, w);
            if f_new <= nll_with_scores(&logs, &labels, &scores, t0, w) {
                t0 = mt.x;
            }
            let f_now = nll_with_scores(&logs, &labels, &scores, t0, w);
            iterations += mw.iterations + mt.iterations;
            let improvement = (f - f_now) / f.abs().max(1e-12);
            f = f_now;
            if improvement < JOINT_REL_TOL {
                converged = true;
                break;
            }
        }
        (t0, w, iterations, converged)
    };

    Ok(Fitted {
        model: CalibrationModel::DensityAware(DensityAwareModel {
            t0,
            w,
            k,
            reference,
        }),
        iterations,
        converged,
        notes,
    })
}

pub struct DensityAwareCalibration;

impl Calibrator for DensityAwareCalibration {
    fn name(&self) -> &'static str {
        "dac"
    }

    fn summary(&self) -> &'static str {
        "density-aware calibration: temperature affine in mean kNN distance"
    }

    fn requires_features(&self) -> bool {
        true
    }

    fn fit_model(&self, cal: &Trace, cfg: &FitConfig) -> Result<Fitted> {
        fit_dac(cal, cfg.dac_k, None)
    }
}
