//! Reliability diagrams and expected calibration error.
//!
//! Bins are equal-width over the top confidence with half-open low edges:
//! bin `k` holds `(k/K, (k+1)/K]`, and a confidence of exactly 0 falls into
//! bin 0.

use std::fmt::Write as _;

use crate::error::{HgnError, Result};
use crate::trace::Trace;

pub const DEFAULT_BINS: usize = 10;

/// Lower edge of bin `k` out of `bins`.
pub fn bin_edge(k: usize, bins: usize) -> f64 {
    k as f64 / bins as f64
}

/// Index of the bin holding `conf`.
pub fn assign_bin(conf: f64, bins: usize) -> Result<usize> {
    if bins == 0 {
        return Err(HgnError::param("bins", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&conf) {
        return Err(HgnError::param(
            "confidence",
            format!("{conf} is outside [0,1]"),
        ));
    }
    Ok(bin_unchecked(conf, bins))
}

pub(crate) fn bin_unchecked(conf: f64, bins: usize) -> usize {
    let mut k = ((conf * bins as f64).ceil() as usize)
        .saturating_sub(1)
        .min(bins - 1);
    // correct for rounding in conf * bins
    while k > 0 && conf <= bin_edge(k, bins) {
        k -= 1;
    }
    while k + 1 < bins && conf > bin_edge(k + 1, bins) {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean top confidence, `None` for an empty bin.
    pub mean_conf: Option<f64>,
    /// Fraction of correct edge predictions, `None` for an empty bin.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationDirection {
    /// Confidence exceeds accuracy in every occupied bin.
    OverConfident,
    /// Accuracy exceeds confidence in every occupied bin.
    UnderConfident,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub bins: Vec<Bin>,
    pub n: usize,
    pub ece: f64,
}

/// Per-bin confidence and accuracy over the edge predictions of a trace.
pub fn bin_stats(trace: &Trace, bins: usize) -> Result<ReliabilityReport> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    if bins == 0 {
        return Err(HgnError::param("bins", "must be at least 1"));
    }
    let mut conf_sum = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for r in &trace.records {
        let (pred, conf) = r.edge_top();
        let k = bin_unchecked(conf, bins);
        conf_sum[k] += conf;
        count[k] += 1;
        if pred == r.ground_truth {
            correct[k] += 1;
        }
    }
    let bins: Vec<Bin> = (0..bins)
        .map(|k| {
            let c = count[k];
            Bin {
                lower: bin_edge(k, bins),
                upper: bin_edge(k + 1, bins),
                count: c,
                mean_conf: (c > 0).then(|| conf_sum[k] / c as f64),
                accuracy: (c > 0).then(|| correct[k] as f64 / c as f64),
            }
        })
        .collect();
    let mut report = ReliabilityReport {
        bins,
        n: trace.len(),
        ece: 0.0,
    };
    report.ece = ece(&report);
    Ok(report)
}

/// Count-weighted mean absolute gap between bin accuracy and bin confidence.
pub fn ece(report: &ReliabilityReport) -> f64 {
    if report.n == 0 {
        return 0.0;
    }
    report
        .bins
        .iter()
        .filter_map(|b| match (b.mean_conf, b.accuracy) {
            (Some(c), Some(a)) => Some(b.count as f64 / report.n as f64 * (a - c).abs()),
            _ => None,
        })
        .sum()
}

/// Binned ECE of a trace's edge confidences.
pub fn trace_ece(trace: &Trace, bins: usize) -> Result<f64> {
    Ok(bin_stats(trace, bins)?.ece)
}

impl ReliabilityReport {
    pub fn direction(&self) -> CalibrationDirection {
        let occupied = || {
            self.bins
                .iter()
                .filter_map(|b| Some((b.mean_conf?, b.accuracy?)))
        };
        if occupied().all(|(c, a)| c > a) {
            CalibrationDirection::OverConfident
        } else if occupied().all(|(c, a)| a > c) {
            CalibrationDirection::UnderConfident
        } else {
            CalibrationDirection::Mixed
        }
    }

    pub const CSV_HEADER: &'static str = "bin_lower,bin_upper,count,mean_conf,accuracy";

    /// One row per bin followed by an `ECE,<value>` footer. Empty bins leave
    /// the confidence and accuracy cells blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                b.lower,
                b.upper,
                b.count,
                cell(b.mean_conf),
                cell(b.accuracy)
            );
        }
        let _ = writeln!(out, "ECE,{}", self.ece);
        out
    }

    pub fn from_csv(text: &str) -> Result<ReliabilityReport> {
        let bad = |line: usize, m: &str| HgnError::Parse {
            line,
            message: m.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == Self::CSV_HEADER => {}
            _ => return Err(bad(1, "missing reliability header")),
        }
        let num = |line: usize, s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(line, &e.to_string()))
        };
        let opt = |line: usize, s: &str| -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(line, s).map(Some)
            }
        };
        let mut bins = Vec::new();
        let mut ece = None;
        for (i, line) in lines {
            let lineno = i + 1;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.first() == Some(&"ECE") {
                ece = Some(num(lineno, cols.get(1).copied().unwrap_or(""))?);
                continue;
            }
            if cols.len() != 5 {
                return Err(bad(lineno, "expected 5 columns"));
            }
            bins.push(Bin {
                lower: num(lineno, cols[0])?,
                upper: num(lineno, cols[1])?,
                count: cols[2]
                    .trim()
                    .parse()
                    .map_err(|_| bad(lineno, "count is not an integer"))?,
                mean_conf: opt(lineno, cols[3])?,
                accuracy: opt(lineno, cols[4])?,
            });
        }
        let n = bins.iter().map(|b| b.count).sum();
        Ok(ReliabilityReport {
            bins,
            n,
            ece: ece.ok_or_else(|| bad(text.lines().count(), "missing ECE footer"))?,
        })
    }
}
