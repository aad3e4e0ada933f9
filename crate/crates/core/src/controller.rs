//! Confidence-threshold offloading policy and decision-quality metrics.
//!
//! The positive class is "keep on edge": a true positive keeps a record on the
//! edge when the edge model is the ideal choice.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{HgnError, Result};
use crate::trace::{PredictionRecord, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelChoice {
    Edge,
    Cloud,
}

/// Offloads iff `confidence < threshold`; equality stays on the edge.
pub fn decide(confidence: f64, threshold: f64) -> ModelChoice {
    if confidence < threshold {
        ModelChoice::Cloud
    } else {
        ModelChoice::Edge
    }
}

/// Ground-truth choice for a record: the edge whenever it is right, the cloud
/// when only the cloud is right, and the (faster) edge when both are wrong.
pub fn ideal_model(record: &PredictionRecord) -> ModelChoice {
    if !record.edge_correct() && record.cloud_correct() {
        ModelChoice::Cloud
    } else {
        ModelChoice::Edge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionOutcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

pub fn outcome(predicted: ModelChoice, ideal: ModelChoice) -> DecisionOutcome {
    use DecisionOutcome::*;
    use ModelChoice::*;
    match (predicted, ideal) {
        (Edge, Edge) => TruePositive,
        (Edge, Cloud) => FalsePositive,
        (Cloud, Edge) => FalseNegative,
        (Cloud, Cloud) => TrueNegative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn add(&mut self, o: DecisionOutcome) {
        match o {
            DecisionOutcome::TruePositive => self.tp += 1,
            DecisionOutcome::FalsePositive => self.fp += 1,
            DecisionOutcome::FalseNegative => self.fn_ += 1,
            DecisionOutcome::TrueNegative => self.tn += 1,
        }
    }
}

pub fn confusion_counts(trace: &Trace, threshold: f64) -> Result<ConfusionCounts> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let mut counts = ConfusionCounts::default();
    for r in &trace.records {
        counts.add(outcome(
            decide(r.edge_confidence(), threshold),
            ideal_model(r),
        ));
    }
    Ok(counts)
}

/// Decision-quality ratios; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecisionMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> DecisionMetrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    DecisionMetrics {
        precision,
        recall,
        f1,
        specificity: ratio(c.tn, c.tn + c.fp),
        accuracy: ratio(c.tp + c.tn, c.total()),
    }
}

impl DecisionMetrics {
    pub fn as_array(&self) -> [Option<f64>; 5] {
        [
            self.precision,
            self.recall,
            self.f1,
            self.specificity,
            self.accuracy,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub metrics: DecisionMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Unweighted mean of each metric over the thresholds where it is defined.
    pub mean: DecisionMetrics,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn sweep(trace: &Trace, thresholds: &[f64]) -> Result<SweepResult> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    if thresholds.is_empty() {
        return Err(HgnError::param("grid", "threshold grid is empty"));
    }
    let rows: Vec<SweepRow> = thresholds
        .par_iter()
        .map(|&t| {
            let counts = confusion_counts(trace, t)?;
            Ok(SweepRow {
                threshold: t,
                counts,
                metrics: metrics(&counts),
            })
        })
        .collect::<Result<_>>()?;
    let col =
        |f: fn(&DecisionMetrics) -> Option<f64>| mean_defined(rows.iter().map(|r| f(&r.metrics)));
    let mean = DecisionMetrics {
        precision: col(|m| m.precision),
        recall: col(|m| m.recall),
        f1: col(|m| m.f1),
        specificity: col(|m| m.specificity),
        accuracy: col(|m| m.accuracy),
    };
    Ok(SweepResult { rows, mean })
}

pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "threshold,tp,fp,fn,tn,precision,recall,f1,specificity,accuracy";

    /// Per-threshold rows plus a trailing `mean` row; undefined cells are blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let c = r.counts;
            let m = r.metrics.as_array().map(cell);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.threshold,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                m.join(",")
            );
        }
        let _ = writeln!(out, "mean,,,,,{}", self.mean.as_array().map(cell).join(","));
        out
    }
}

/// Validated ascending list of thresholds in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid(Vec<f64>);

impl ThresholdGrid {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HgnError::param("grid", "threshold grid is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(HgnError::param(
                "grid",
                format!("threshold {v} is outside [0,1]"),
            ));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        values.dedup();
        Ok(ThresholdGrid(values))
    }

    /// `count` evenly spaced points from `start` to `stop` inclusive, rounded
    /// to 1e-9 so printed values stay short.
    pub fn linspace(start: f64, stop: f64, step: f64) -> Result<Self> {
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(HgnError::param(
                "grid",
                "expected start:stop:step with step > 0 and stop >= start",
            ));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect();
        Self::new(values)
    }

    /// The default 21-point grid `0.00, 0.05, ..., 1.00`.
    pub fn default_grid() -> Self {
        ThresholdGrid((0..=20).map(|i| i as f64 / 20.0).collect())
    }

    /// Parses `start:stop:step` or a comma-separated list.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| HgnError::param("grid", format!("`{s}`: {e}")))
        };
        if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(HgnError::param("grid", "range form is start:stop:step"));
            }
            return Self::linspace(num(parts[0])?, num(parts[1])?, num(parts[2])?);
        }
        Self::new(spec.split(',').map(num).collect::<Result<_>>()?)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self::default_grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::tests::rec;

    /// Five-class record predicting class 0 with `conf`, the rest spread evenly.
    fn r(id: &str, y: usize, conf: f64, cloud: usize) -> PredictionRecord {
        let rest = (1.0 - conf) / 4.0;
        rec(id, y, vec![conf, rest, rest, rest, rest], cloud)
    }

    /// edge-correct .9; edge-wrong/cloud-right .3; edge-wrong/cloud-right .8;
    /// both wrong .2 (uniform vector, class 0 by tie-break).
    fn four_record_trace() -> Trace {
        Trace::new(
            5,
            vec![
                r("a", 0, 0.9, 0),
                r("b", 1, 0.3, 1),
                r("c", 1, 0.8, 1),
                r("d", 1, 0.2, 2),
            ],
        )
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.9, 0.55), ModelChoice::Edge);
        assert_eq!(decide(0.4, 0.55), ModelChoice::Cloud);
        assert_eq!(decide(0.55, 0.55), ModelChoice::Edge);
    }

    #[test]
    fn ideal_model_table() {
        assert_eq!(ideal_model(&r("a", 0, 0.9, 0)), ModelChoice::Edge);
        assert_eq!(ideal_model(&r("a", 0, 0.9, 1)), ModelChoice::Edge);
        assert_eq!(ideal_model(&r("a", 1, 0.9, 1)), ModelChoice::Cloud);
        assert_eq!(ideal_model(&r("a", 1, 0.9, 0)), ModelChoice::Edge);
    }

    #[test]
    fn outcome_table() {
        use DecisionOutcome::*;
        use ModelChoice::*;
        assert_eq!(outcome(Edge, Edge), TruePositive);
        assert_eq!(outcome(Edge, Cloud), FalsePositive);
        assert_eq!(outcome(Cloud, Edge), FalseNegative);
        assert_eq!(outcome(Cloud, Cloud), TrueNegative);
    }

    #[test]
    fn hand_trace_counts_and_metrics() {
        let t = four_record_trace();
        assert!(t.validate().is_empty(), "{:?}", t.validate());
        let c = confusion_counts(&t, 0.5).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        for v in metrics(&c).as_array() {
            assert_eq!(v, Some(0.5));
        }
    }

    #[test]
    fn endpoints() {
        let t = four_record_trace();
        let c = confusion_counts(&t, 0.0).unwrap();
        assert_eq!((c.fn_, c.tn), (0, 0));
        let ideal_edge = t
            .records
            .iter()
            .filter(|r| ideal_model(r) == ModelChoice::Edge)
            .count();
        assert_eq!((c.tp, c.fp), (ideal_edge, t.len() - ideal_edge));
        let c = confusion_counts(&t, 0.9 + 1e-9).unwrap();
        assert_eq!((c.tp, c.fp), (0, 0));
        assert!(confusion_counts(&Trace::new(2, vec![]), 0.5).is_err());
    }

    #[test]
    fn metric_edge_cases() {
        let all_tp = metrics(&ConfusionCounts {
            tp: 7,
            ..Default::default()
        });
        assert_eq!(all_tp.precision, Some(1.0));
        assert_eq!(all_tp.recall, Some(1.0));
        assert_eq!(all_tp.f1, Some(1.0));
        assert_eq!(all_tp.accuracy, Some(1.0));
        assert_eq!(all_tp.specificity, None);

        let none_kept = metrics(&ConfusionCounts {
            fn_: 2,
            tn: 3,
            ..Default::default()
        });
        assert_eq!(none_kept.precision, None);
        assert_eq!(none_kept.f1, None);
        assert_eq!(none_kept.specificity, Some(1.0));
    }

    #[test]
    fn sweep_csv_and_means() {
        let t = four_record_trace();
        let s = sweep(&t, &[0.0, 1.01]).unwrap();
        assert_eq!(s.rows[0].metrics.recall, Some(1.0));
        assert_eq!(s.rows[1].metrics.specificity, Some(1.0));
        assert_eq!(s.rows[1].metrics.precision, None);
        // precision only defined at the low end, so its mean is that value
        assert_eq!(s.mean.precision, s.rows[0].metrics.precision);
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "threshold,tp,fp,fn,tn,precision,recall,f1,specificity,accuracy"
        );
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1.01,0,0,"));
        assert!(lines[2].contains(",,"));
        assert!(lines[3].starts_with("mean,,,,,"));
    }

    #[test]
    fn grid_parsing() {
        let g = ThresholdGrid::default();
        assert_eq!(g.values().len(), 21);
        assert_eq!(g.values()[3], 0.15);
        assert_eq!(ThresholdGrid::parse("0:1:0.05").unwrap(), g);
        assert_eq!(
            ThresholdGrid::parse("0.5, 0.1").unwrap().values(),
            &[0.1, 0.5]
        );
        assert!(ThresholdGrid::parse("0.5,1.5").is_err());
        assert!(ThresholdGrid::parse("").is_err());
        assert!(ThresholdGrid::parse("0:1:0").is_err());
    }
}
