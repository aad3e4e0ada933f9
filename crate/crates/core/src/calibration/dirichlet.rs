//! Dirichlet calibration: `q = softmax(W ln p + b)` with off-diagonal and
//! intercept regularisation.

use serde::{Deserialize, Serialize};

use super::temperature::cal_arrays;
use super::{log_probs, softmax, CalibrationModel, Calibrator, FitConfig, Fitted};
use crate::error::{HgnError, Result};
use crate::trace::Trace;

pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 2000;
pub const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletModel {
    pub num_classes: usize,
    /// Row-major `C x C`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub lambda: f64,
}

impl DirichletModel {
    pub fn identity(num_classes: usize, lambda: f64) -> Self {
        let c = num_classes;
        let mut weights = vec![0.0; c * c];
        for i in 0..c {
            weights[i * c + i] = 1.0;
        }
        DirichletModel {
            num_classes: c,
            weights,
            bias: vec![0.0; c],
            lambda,
        }
    }

    pub fn w(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.num_classes + col]
    }

    fn logits(&self, logs: &[f64]) -> Vec<f64> {
        let c = self.num_classes;
        (0..c)
            .map(|i| {
                let row = &self.weights[i * c..(i + 1) * c];
                row.iter().zip(logs).map(|(w, l)| w * l).sum::<f64>() + self.bias[i]
            })
            .collect()
    }

    pub fn apply(&self, probs: &[f64]) -> Result<Vec<f64>> {
        if probs.len() != self.num_classes {
            return Err(HgnError::param(
                "edge_probs",
                format!(
                    "length {} does not match model classes {}",
                    probs.len(),
                    self.num_classes
                ),
            ));
        }
        Ok(softmax(&self.logits(&log_probs(probs))))
    }

    /// Parameters flattened as `[W (row-major), b]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn from_params(num_classes: usize, params: &[f64], lambda: f64) -> Self {
        let cc = num_classes * num_classes;
        DirichletModel {
            num_classes,
            weights: params[..cc].to_vec(),
            bias: params[cc..].to_vec(),
            lambda,
        }
    }
}

/// Regularised objective and its analytic gradient with respect to the
/// flattened `[W, b]` parameters:
/// `mean NLL + lambda * (mean off-diagonal W^2 + mean b^2)`.
pub fn objective_and_gradient(
    num_classes: usize,
    params: &[f64],
    logs: &[Vec<f64>],
    labels: &[usize],
    lambda: f64,
) -> (f64, Vec<f64>) {
    let c = num_classes;
    let cc = c * c;
    let n = logs.len() as f64;
    let (w, b) = params.split_at(cc);
    let mut grad = vec![0.0; cc + c];
    let mut loss = 0.0;
    let mut z = vec![0.0; c];
    for (l, &y) in logs.iter().zip(labels) {
        for i in 0..c {
            z[i] = w[i * c..(i + 1) * c]
                .iter()
                .zip(l)
                .map(|(a, x)| a * x)
                .sum::<f64>()
                + b[i];
        }
        let m = z.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
        loss += m + sum.ln() - z[y];
        for i in 0..c {
            let dz = ((z[i] - m).exp() / sum - if i == y { 1.0 } else { 0.0 }) / n;
            if dz == 0.0 {
                continue;
            }
            for j in 0..c {
                grad[i * c + j] += dz * l[j];
            }
            grad[cc + i] += dz;
        }
    }
    loss /= n;

    if lambda > 0.0 {
        if c > 1 {
            let off = (c * (c - 1)) as f64;
            for i in 0..c {
                for j in 0..c {
                    if i != j {
                        let v = w[i * c + j];
                        loss += lambda * v * v / off;
                        grad[i * c + j] += 2.0 * lambda * v / off;
                    }
                }
            }
        }
        for i in 0..c {
            loss += lambda * b[i] * b[i] / c as f64;
            grad[cc + i] += 2.0 * lambda * b[i] / c as f64;
        }
    }
    (loss, grad)
}

fn objective(c: usize, params: &[f64], logs: &[Vec<f64>], labels: &[usize], lambda: f64) -> f64 {
    let cc = c * c;
    let (w, b) = params.split_at(cc);
    let mut z = vec![0.0; c];
    let mut loss = 0.0;
    for (l, &y) in logs.iter().zip(labels) {
        for i in 0..c {
            z[i] = w[i * c..(i + 1) * c]
                .iter()
                .zip(l)
                .map(|(a, x)| a * x)
                .sum::<f64>()
                + b[i];
        }
        let m = z.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        loss += m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[y];
    }
    loss /= logs.len() as f64;
    if lambda > 0.0 {
        if c > 1 {
            let off: f64 = (0..c)
                .flat_map(|i| (0..c).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| w[i * c + j] * w[i * c + j])
                .sum();
            loss += lambda * off / (c * (c - 1)) as f64;
        }
        loss += lambda * b.iter().map(|v| v * v).sum::<f64>() / c as f64;
    }
    loss
}

/// Gradient descent from the identity map with Armijo backtracking. The step
/// grows after each accepted move and halves on each rejected probe.
pub fn fit_dirichlet(cal: &Trace, lambda: f64) -> Result<Fitted> {
    if cal.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(HgnError::param(
            "lambda",
            format!("{lambda} must be finite and nonnegative"),
        ));
    }
    let c = cal.num_classes;
    let (logs, labels) = cal_arrays(cal);
    let mut params = DirichletModel::identity(c, lambda).params();
    let (mut loss, mut grad) = objective_and_gradient(c, &params, &logs, &labels, lambda);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - step * g)
                .collect();
            let f = objective(c, &trial, &logs, &labels, lambda);
            if f <= loss - 1e-4 * step * gnorm2 {
                accepted = Some((trial, f));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, f)) = accepted else {
            converged = true;
            break;
        };
        let improvement = (loss - f) / loss.abs().max(1e-12);
        params = trial;
        let (l, g) = objective_and_gradient(c, &params, &logs, &labels, lambda);
        loss = l;
        grad = g;
        step *= 2.0;
        if improvement < REL_TOL {
            converged = true;
            break;
        }
    }

    Ok(Fitted {
        model: CalibrationModel::Dirichlet(DirichletModel::from_params(c, &params, lambda)),
        iterations,
        converged,
        notes: Vec::new(),
    })
}

pub struct DirichletCalibration;

impl Calibrator for DirichletCalibration {
    fn name(&self) -> &'static str {
        "dc"
    }

    fn summary(&self) -> &'static str {
        "Dirichlet calibration: linear map on log-probabilities with ODIR-style regularisation"
    }

    fn fit_model(&self, cal: &Trace, cfg: &FitConfig) -> Result<Fitted> {
        fit_dirichlet(cal, cfg.dc_lambda)
    }
}
