//! User-facing evaluation: grasp scenarios, the user upsetness index (UII),
//! latency and latency/accuracy operating points.
//!
//! The edge prediction is always enacted first. An offloaded record may then
//! be overridden by the cloud prediction when the two differ, which costs
//! the network round trip plus cloud inference time.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::controller::{decide, ModelChoice};
use crate::error::{HgnError, Result};
use crate::trace::{PredictionRecord, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Correct and on time.
    S1,
    /// Late but correct: the cloud fixed an edge mistake.
    S2,
    /// Incorrect: the edge mistake stood.
    S3,
    /// Late and incorrect: the cloud replaced one mistake with another.
    S4,
    /// Late and incorrect override: the cloud overturned a correct edge grasp.
    S5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::S1,
        Scenario::S2,
        Scenario::S3,
        Scenario::S4,
        Scenario::S5,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn implication(self) -> &'static str {
        match self {
            Scenario::S1 => "None",
            Scenario::S2 => "Late",
            Scenario::S3 => "Incorrect",
            Scenario::S4 => "Late and incorrect",
            Scenario::S5 => "Late and incorrect override",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index() + 1)
    }
}

/// The four facts a scenario depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioFlags {
    pub edge_correct: bool,
    pub offloaded: bool,
    pub cloud_correct: bool,
    /// Cloud and edge predict the same class.
    pub same: bool,
}

impl ScenarioFlags {
    pub fn of(record: &PredictionRecord, threshold: f64) -> Self {
        let (pred, conf) = record.edge_top();
        ScenarioFlags {
            edge_correct: pred == record.ground_truth,
            offloaded: decide(conf, threshold) == ModelChoice::Cloud,
            cloud_correct: record.cloud_pred == record.ground_truth,
            same: record.cloud_pred == pred,
        }
    }

    /// Whether a real record can produce these flags: when either model is
    /// right, "same prediction" is fixed by whether the other one is too.
    pub fn feasible(&self) -> bool {
        match (self.edge_correct, self.cloud_correct) {
            (true, true) => self.same,
            (true, false) | (false, true) => !self.same,
            (false, false) => true,
        }
    }

    /// Every scenario whose defining predicate holds for these flags.
    pub fn matching(&self) -> Vec<Scenario> {
        let ScenarioFlags {
            edge_correct: e,
            offloaded: o,
            cloud_correct: c,
            same: s,
        } = *self;
        let predicates = [
            (Scenario::S1, e && (!o || c)),
            (Scenario::S2, !e && o && c),
            (Scenario::S3, !e && (!o || (!c && s))),
            (Scenario::S4, !e && o && !c && !s),
            (Scenario::S5, e && o && !c),
        ];
        predicates
            .into_iter()
            .filter(|p| p.1)
            .map(|p| p.0)
            .collect()
    }

    pub fn scenario(&self) -> Scenario {
        let (e, o, c, s) = (
            self.edge_correct,
            self.offloaded,
            self.cloud_correct,
            self.same,
        );
        match (e, o) {
            (true, false) => Scenario::S1,
            (true, true) if c => Scenario::S1,
            (true, true) => Scenario::S5,
            (false, false) => Scenario::S3,
            (false, true) if c => Scenario::S2,
            (false, true) if s => Scenario::S3,
            (false, true) => Scenario::S4,
        }
    }
}

pub fn scenario(record: &PredictionRecord, threshold: f64) -> Scenario {
    ScenarioFlags::of(record, threshold).scenario()
}

/// Class finally enacted by the hand for this record.
pub fn enacted_grasp(record: &PredictionRecord, threshold: f64) -> usize {
    let (pred, conf) = record.edge_top();
    match decide(conf, threshold) {
        ModelChoice::Edge => pred,
        ModelChoice::Cloud => record.cloud_pred,
    }
}

/// Accuracy of the enacted grasps, computed per record without scenarios.
pub fn enacted_accuracy(trace: &Trace, threshold: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let hits = trace
        .records
        .iter()
        .filter(|r| enacted_grasp(r, threshold) == r.ground_truth)
        .count();
    Ok(hits as f64 / trace.len() as f64)
}

/// Penalty per scenario, indexed S1..S5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyTable(pub [f64; 5]);

impl Default for PenaltyTable {
    fn default() -> Self {
        PenaltyTable([0.0, 1.0, 5.0, 6.0, 7.0])
    }
}

impl PenaltyTable {
    pub fn new(values: [f64; 5]) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(HgnError::param(
                "penalties",
                "penalties must be finite and nonnegative",
            ));
        }
        if values[0] != 0.0 {
            return Err(HgnError::param("penalties", "the S1 penalty must be 0"));
        }
        Ok(PenaltyTable(values))
    }

    /// Parses five comma-separated values, e.g. `0,1,5,6,7`.
    pub fn parse(spec: &str) -> Result<Self> {
        let vals: Vec<f64> = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| HgnError::param("penalties", format!("`{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let arr: [f64; 5] = vals.try_into().map_err(|v: Vec<f64>| {
            HgnError::param("penalties", format!("expected 5 values, got {}", v.len()))
        })?;
        Self::new(arr)
    }

    pub fn penalty(&self, s: Scenario) -> f64 {
        self.0[s.index()]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.map(|v| v * factor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyConfig {
    pub network_rtt_ms: f64,
    pub deadline_ms: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            network_rtt_ms: 50.0,
            deadline_ms: 150.0,
        }
    }
}

impl LatencyConfig {
    pub fn new(network_rtt_ms: f64, deadline_ms: f64) -> Result<Self> {
        for (name, v) in [("rtt-ms", network_rtt_ms), ("deadline-ms", deadline_ms)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HgnError::param(
                    name,
                    format!("{v} must be finite and nonnegative"),
                ));
            }
        }
        Ok(LatencyConfig {
            network_rtt_ms,
            deadline_ms,
        })
    }
}

/// Time until the final grasp decision: the edge pass alone, or the edge pass
/// followed by the round trip and cloud inference.
pub fn sample_latency(
    record: &PredictionRecord,
    decision: ModelChoice,
    cfg: &LatencyConfig,
) -> f64 {
    match decision {
        ModelChoice::Edge => record.edge_latency_ms,
        ModelChoice::Cloud => record.edge_latency_ms + cfg.network_rtt_ms + record.cloud_latency_ms,
    }
}

pub fn uii(trace: &Trace, threshold: f64, penalties: &PenaltyTable) -> Result<f64> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let total: f64 = trace
        .records
        .iter()
        .map(|r| penalties.penalty(scenario(r, threshold)))
        .sum();
    Ok(total / trace.len() as f64)
}

/// Scenario counts at one threshold, indexed S1..S5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioCounts(pub [usize; 5]);

impl ScenarioCounts {
    pub fn get(&self, s: Scenario) -> usize {
        self.0[s.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

pub fn scenario_counts(trace: &Trace, threshold: f64) -> ScenarioCounts {
    let mut c = [0usize; 5];
    for r in &trace.records {
        c[scenario(r, threshold).index()] += 1;
    }
    ScenarioCounts(c)
}

pub fn scenario_distribution(trace: &Trace, thresholds: &[f64]) -> Vec<(f64, ScenarioCounts)> {
    thresholds
        .par_iter()
        .map(|&t| (t, scenario_counts(trace, t)))
        .collect()
}

pub const SCENARIO_CSV_HEADER: &str = "threshold,s1,s2,s3,s4,s5";

pub fn scenario_csv(rows: &[(f64, ScenarioCounts)]) -> String {
    let mut out = String::from(SCENARIO_CSV_HEADER);
    out.push('\n');
    for (t, c) in rows {
        let cells: Vec<String> = c.0.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{t},{}", cells.join(","));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub method: String,
    /// `None` for fixed baselines that have no threshold.
    pub threshold: Option<f64>,
    pub final_accuracy: f64,
    pub mean_latency_ms: f64,
    pub uii: f64,
    pub deadline_hit_rate: f64,
    pub offload_fraction: f64,
}

pub fn aggregate(
    method: &str,
    trace: &Trace,
    threshold: f64,
    cfg: &LatencyConfig,
    penalties: &PenaltyTable,
) -> Result<OperatingPoint> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let n = trace.len() as f64;
    let mut counts = [0usize; 5];
    let mut latency = 0.0;
    let mut on_time = 0usize;
    let mut offloaded = 0usize;
    for r in &trace.records {
        let choice = decide(r.edge_confidence(), threshold);
        counts[scenario(r, threshold).index()] += 1;
        let l = sample_latency(r, choice, cfg);
        latency += l;
        if l <= cfg.deadline_ms {
            on_time += 1;
        }
        if choice == ModelChoice::Cloud {
            offloaded += 1;
        }
    }
    let penalty: f64 = Scenario::ALL
        .iter()
        .map(|&s| penalties.penalty(s) * counts[s.index()] as f64)
        .sum();
    Ok(OperatingPoint {
        method: method.to_string(),
        threshold: Some(threshold),
        final_accuracy: (counts[0] + counts[1]) as f64 / n,
        mean_latency_ms: latency / n,
        uii: penalty / n,
        deadline_hit_rate: on_time as f64 / n,
        offload_fraction: offloaded as f64 / n,
    })
}

pub fn operating_points(
    method: &str,
    trace: &Trace,
    thresholds: &[f64],
    cfg: &LatencyConfig,
    penalties: &PenaltyTable,
) -> Result<Vec<OperatingPoint>> {
    thresholds
        .par_iter()
        .map(|&t| aggregate(method, trace, t, cfg, penalties))
        .collect()
}

/// Edge model alone: never offload.
pub fn edge_only_point(
    trace: &Trace,
    cfg: &LatencyConfig,
    penalties: &PenaltyTable,
) -> Result<OperatingPoint> {
    let mut p = aggregate("edge-only", trace, 0.0, cfg, penalties)?;
    p.threshold = None;
    Ok(p)
}

/// Cloud model alone, without an edge pass: every answer arrives after the
/// round trip, so a correct one is late (S2 penalty) and a wrong one is late
/// and incorrect (S4 penalty).
pub fn cloud_only_point(
    trace: &Trace,
    cfg: &LatencyConfig,
    penalties: &PenaltyTable,
) -> Result<OperatingPoint> {
    if trace.is_empty() {
        return Err(HgnError::EmptyTrace);
    }
    let n = trace.len() as f64;
    let (mut correct, mut latency, mut on_time) = (0usize, 0.0, 0usize);
    for r in &trace.records {
        let l = cfg.network_rtt_ms + r.cloud_latency_ms;
        latency += l;
        if l <= cfg.deadline_ms {
            on_time += 1;
        }
        if r.cloud_correct() {
            correct += 1;
        }
    }
    let wrong = trace.len() - correct;
    Ok(OperatingPoint {
        method: "cloud-only".into(),
        threshold: None,
        final_accuracy: correct as f64 / n,
        mean_latency_ms: latency / n,
        uii: (penalties.penalty(Scenario::S2) * correct as f64
            + penalties.penalty(Scenario::S4) * wrong as f64)
            / n,
        deadline_hit_rate: on_time as f64 / n,
        offload_fraction: 1.0,
    })
}

fn dominates(a: &OperatingPoint, b: &OperatingPoint) -> bool {
    a.final_accuracy >= b.final_accuracy
        && a.mean_latency_ms <= b.mean_latency_ms
        && (a.final_accuracy > b.final_accuracy || a.mean_latency_ms < b.mean_latency_ms)
}

/// Flags each point that no other point dominates under (max accuracy,
/// min latency). Identical points do not dominate each other.
pub fn pareto_flags(points: &[OperatingPoint]) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect()
}

/// Non-dominated subset sorted by latency (ties by descending accuracy, then
/// input order).
pub fn pareto_front(points: &[OperatingPoint]) -> Vec<OperatingPoint> {
    let flags = pareto_flags(points);
    let mut front: Vec<OperatingPoint> = points
        .iter()
        .zip(flags)
        .filter(|(_, keep)| *keep)
        .map(|(p, _)| p.clone())
        .collect();
    front.sort_by(|a, b| {
        a.mean_latency_ms
            .total_cmp(&b.mean_latency_ms)
            .then(b.final_accuracy.total_cmp(&a.final_accuracy))
    });
    front
}

/// Threshold with the lowest UII over `grid`; ties go to the lower threshold.
pub fn min_uii_threshold(
    trace: &Trace,
    grid: &[f64],
    penalties: &PenaltyTable,
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(HgnError::param("grid", "threshold grid is empty"));
    }
    let values: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&t| uii(trace, t, penalties).map(|u| (t, u)))
        .collect::<Result<_>>()?;
    Ok(values
        .into_iter()
        .reduce(|best, cur| {
            if cur.1 < best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
        .expect("grid is non-empty"))
}

pub const OPERATING_POINT_CSV_HEADER: &str =
    "method,threshold,accuracy,mean_latency_ms,uii,deadline_hit_rate,offload_fraction";

impl OperatingPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            crate::controller::cell(self.threshold),
            self.final_accuracy,
            self.mean_latency_ms,
            self.uii,
            self.deadline_hit_rate,
            self.offload_fraction
        )
    }

    pub fn from_csv_row(line: &str, lineno: usize) -> Result<Self> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 7 {
            return Err(HgnError::Parse {
                line: lineno,
                message: format!("expected 7 columns, got {}", cols.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            cols[i].trim().parse().map_err(|e| HgnError::Parse {
                line: lineno,
                message: format!("column {}: {e}", i + 1),
            })
        };
        Ok(OperatingPoint {
            method: cols[0].to_string(),
            threshold: if cols[1].trim().is_empty() {
                None
            } else {
                Some(num(1)?)
            },
            final_accuracy: num(2)?,
            mean_latency_ms: num(3)?,
            uii: num(4)?,
            deadline_hit_rate: num(5)?,
            offload_fraction: num(6)?,
        })
    }
}

pub fn operating_points_csv(points: &[OperatingPoint]) -> String {
    let mut out = String::from(OPERATING_POINT_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

/// Operating points with an extra `pareto` column (1 on the front).
pub fn pareto_csv(points: &[OperatingPoint]) -> String {
    let flags = pareto_flags(points);
    let mut out = format!("{OPERATING_POINT_CSV_HEADER},pareto\n");
    for (p, f) in points.iter().zip(flags) {
        let _ = writeln!(out, "{},{}", p.csv_row(), u8::from(f));
    }
    out
}

pub fn parse_operating_points(text: &str) -> Result<Vec<OperatingPoint>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with(OPERATING_POINT_CSV_HEADER) => {}
        _ => {
            return Err(HgnError::Parse {
                line: 1,
                message: format!("expected header `{OPERATING_POINT_CSV_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| OperatingPoint::from_csv_row(l, i + 1))
        .collect()
}
