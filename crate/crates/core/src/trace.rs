//! Prediction traces: the interchange format between upstream models and
//! everything else in this crate.
//!
//! A trace file is newline-delimited JSON. The first line is a header of the
//! form `{"meta":{"num_classes":13,"metadata":{...}}}`; every following line
//! is one [`PredictionRecord`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HgnError, Result};

pub const DEFAULT_NUM_CLASSES: usize = 13;

/// Tolerance on `sum(edge_probs) == 1`.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Semantic-projection split membership of the object behind a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectTag {
    Seen,
    Unseen,
}

impl fmt::Display for ObjectTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectTag::Seen => f.write_str("seen"),
            ObjectTag::Unseen => f.write_str("unseen"),
        }
    }
}

impl std::str::FromStr for ObjectTag {
    type Err = HgnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seen" => Ok(ObjectTag::Seen),
            "unseen" => Ok(ObjectTag::Unseen),
            other => Err(HgnError::param(
                "object_tag",
                format!("expected seen|unseen, got `{other}`"),
            )),
        }
    }
}

/// One inference event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub object_tag: ObjectTag,
    pub ground_truth: usize,
    pub edge_probs: Vec<f64>,
    pub edge_latency_ms: f64,
    pub cloud_pred: usize,
    pub cloud_latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl PredictionRecord {
    /// Edge argmax and its probability. Assumes a validated record.
    pub fn edge_top(&self) -> (usize, f64) {
        argmax(&self.edge_probs)
    }

    pub fn edge_pred(&self) -> usize {
        self.edge_top().0
    }

    pub fn edge_confidence(&self) -> f64 {
        self.edge_top().1
    }

    pub fn edge_correct(&self) -> bool {
        self.edge_pred() == self.ground_truth
    }

    pub fn cloud_correct(&self) -> bool {
        self.cloud_pred == self.ground_truth
    }
}

/// Argmax with ties going to the lowest index. Panics on an empty slice.
pub(crate) fn argmax(probs: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    (best, probs[best])
}

/// Confidence score of a probability vector: the highest class probability
/// together with its class index.
pub fn top_confidence(probs: &[f64]) -> Result<(usize, f64)> {
    check_probs(probs).map_err(|m| HgnError::param("edge_probs", m))?;
    Ok(argmax(probs))
}

fn check_probs(probs: &[f64]) -> std::result::Result<(), String> {
    if probs.is_empty() {
        return Err("probability vector is empty".into());
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
    {
        return Err(format!("entry {i} = {p} is outside [0,1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(format!("entries sum to {sum}, expected 1"));
    }
    Ok(())
}

/// A single invariant violation found by [`Trace::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the offending record, `None` for trace-level problems.
    pub record: Option<usize>,
    pub sample_id: Option<String>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.record, &self.sample_id) {
            (Some(i), Some(id)) => {
                write!(f, "record {i} (`{id}`): {}: {}", self.field, self.message)
            }
            _ => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub num_classes: usize,
    pub records: Vec<PredictionRecord>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: HeaderMeta,
}

#[derive(Serialize, Deserialize)]
struct HeaderMeta {
    num_classes: usize,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl Trace {
    pub fn new(num_classes: usize, records: Vec<PredictionRecord>) -> Self {
        Trace {
            num_classes,
            records,
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Feature dimension shared by all records, if the trace carries features.
    pub fn feature_dim(&self) -> Option<usize> {
        self.records
            .first()
            .and_then(|r| r.features.as_ref().map(Vec::len))
    }

    /// A copy of this trace holding only `records`, keeping class count and metadata.
    pub fn with_records(&self, records: Vec<PredictionRecord>) -> Trace {
        Trace {
            num_classes: self.num_classes,
            records,
            metadata: self.metadata.clone(),
        }
    }

    /// Returns every invariant violation; empty iff the trace is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let c = self.num_classes;
        if c == 0 {
            out.push(Violation {
                record: None,
                sample_id: None,
                field: "num_classes",
                message: "must be at least 1".into(),
            });
        }
        let mut seen_ids = HashSet::new();
        let feature_dim = self
            .records
            .iter()
            .find_map(|r| r.features.as_ref().map(Vec::len));
        let any_features = feature_dim.is_some();

        for (i, r) in self.records.iter().enumerate() {
            let mut push = |field: &'static str, message: String| {
                out.push(Violation {
                    record: Some(i),
                    sample_id: Some(r.sample_id.clone()),
                    field,
                    message,
                })
            };
            if !seen_ids.insert(r.sample_id.as_str()) {
                push(
                    "sample_id",
                    format!("duplicate sample_id `{}`", r.sample_id),
                );
            }
            if r.edge_probs.len() != c {
                push(
                    "edge_probs",
                    format!(
                        "length {} does not match num_classes {c}",
                        r.edge_probs.len()
                    ),
                );
            } else if let Err(m) = check_probs(&r.edge_probs) {
                push("edge_probs", m);
            }
            if r.ground_truth >= c {
                push(
                    "ground_truth",
                    format!("class {} outside 0..{c}", r.ground_truth),
                );
            }
            if r.cloud_pred >= c {
                push(
                    "cloud_pred",
                    format!("class {} outside 0..{c}", r.cloud_pred),
                );
            }
            if !r.edge_latency_ms.is_finite() || r.edge_latency_ms < 0.0 {
                push(
                    "edge_latency_ms",
                    format!("{} is not a finite nonnegative value", r.edge_latency_ms),
                );
            }
            if !r.cloud_latency_ms.is_finite() || r.cloud_latency_ms < 0.0 {
                push(
                    "cloud_latency_ms",
                    format!("{} is not a finite nonnegative value", r.cloud_latency_ms),
                );
            }
            match (&r.features, feature_dim) {
                (None, _) if any_features => push(
                    "features",
                    "missing while other records carry features".into(),
                ),
                (Some(f), Some(d)) => {
                    if f.len() != d {
                        push(
                            "features",
                            format!("dimension {} differs from {d}", f.len()),
                        );
                    } else if f.iter().any(|x| !x.is_finite()) {
                        push("features", "non-finite entry".into());
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Reads a trace file and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Trace> {
        let file = fs::File::open(path.as_ref())?;
        Self::read(BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Trace> {
        let mut num_classes: Option<usize> = None;
        let mut metadata = BTreeMap::new();
        let mut records = Vec::new();
        let mut lines_of = Vec::new();
        let mut saw_header = false;

        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| HgnError::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            if value.get("meta").is_some() {
                if saw_header || !records.is_empty() {
                    return Err(HgnError::Parse {
                        line: lineno,
                        message: "header line must come first and appear once".into(),
                    });
                }
                let header: Header =
                    serde_json::from_value(value).map_err(|e| HgnError::Parse {
                        line: lineno,
                        message: e.to_string(),
                    })?;
                saw_header = true;
                num_classes = Some(header.meta.num_classes);
                metadata = header.meta.metadata;
                continue;
            }
            let record: PredictionRecord =
                serde_json::from_value(value).map_err(|e| HgnError::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
            match num_classes {
                None => num_classes = Some(record.edge_probs.len()),
                Some(c) if !saw_header && c != record.edge_probs.len() => {
                    return Err(HgnError::MismatchedClasses {
                        expected: c,
                        found: record.edge_probs.len(),
                    })
                }
                _ => {}
            }
            records.push(record);
            lines_of.push(lineno);
        }

        if records.is_empty() {
            log::warn!("trace contains no records");
        }
        let trace = Trace {
            num_classes: num_classes.unwrap_or(DEFAULT_NUM_CLASSES),
            records,
            metadata,
        };
        if let Some(v) = trace.validate().into_iter().next() {
            let line = v.record.map(|i| lines_of[i]).unwrap_or(1);
            if saw_header && v.field == "edge_probs" && v.message.starts_with("length") {
                return Err(HgnError::MismatchedClasses {
                    expected: trace.num_classes,
                    found: trace.records[v.record.unwrap()].edge_probs.len(),
                });
            }
            return Err(HgnError::InvalidRecord {
                line,
                field: v.field.to_string(),
                message: v.message,
            });
        }
        Ok(trace)
    }

    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let header = Header {
            meta: HeaderMeta {
                num_classes: self.num_classes,
                metadata: self.metadata.clone(),
            },
        };
        serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(fs::File::create(path.as_ref())?)
    }

    pub fn split_by_tag(&self, tag: ObjectTag) -> Trace {
        self.with_records(
            self.records
                .iter()
                .filter(|r| r.object_tag == tag)
                .cloned()
                .collect(),
        )
    }

    /// Deterministic seeded partition into (first, second) with
    /// `round(fraction * n)` records in the first part. Both parts keep the
    /// original record order.
    pub fn seeded_split(&self, fraction: f64, seed: u64) -> (Trace, Trace) {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let k = ((fraction * n as f64).round() as usize).min(n);
        let mut in_first = vec![false; n];
        for &i in &idx[..k] {
            in_first[i] = true;
        }
        let (mut a, mut b) = (Vec::with_capacity(k), Vec::with_capacity(n - k));
        for (i, r) in self.records.iter().enumerate() {
            if in_first[i] {
                a.push(r.clone());
            } else {
                b.push(r.clone());
            }
        }
        (self.with_records(a), self.with_records(b))
    }
}

/// Draws `k` indices from `0..len`, without replacement when `len >= k`.
fn draw_indices(len: usize, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    if k <= len {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(rng);
        idx.truncate(k);
        (idx, false)
    } else {
        ((0..k).map(|_| rng.gen_range(0..len)).collect(), true)
    }
}

/// Composes a trace with exactly `round(n * seen_fraction)` records drawn
/// from `seen` and the rest from `unseen`. Records are retagged by source and
/// the result is shuffled; repeated draws get a `~r<k>` id suffix.
pub fn mix_traces(
    seen: &Trace,
    unseen: &Trace,
    seen_fraction: f64,
    n: usize,
    seed: u64,
) -> Result<Trace> {
    if !(0.0..=1.0).contains(&seen_fraction) {
        return Err(HgnError::param(
            "seen_fraction",
            format!("{seen_fraction} is outside [0,1]"),
        ));
    }
    if seen.num_classes != unseen.num_classes {
        return Err(HgnError::MismatchedClasses {
            expected: seen.num_classes,
            found: unseen.num_classes,
        });
    }
    let n_seen = (n as f64 * seen_fraction).round() as usize;
    let n_unseen = n - n_seen;
    if n_seen > 0 && seen.is_empty() {
        return Err(HgnError::param(
            "seen",
            "trace is empty but seen_fraction > 0",
        ));
    }
    if n_unseen > 0 && unseen.is_empty() {
        return Err(HgnError::param(
            "unseen",
            "trace is empty but unseen share > 0",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut metadata = BTreeMap::new();
    metadata.insert("mix_seed".to_string(), seed.to_string());
    metadata.insert("mix_seen_fraction".to_string(), seen_fraction.to_string());

    let mut records = Vec::with_capacity(n);
    for (source, k, tag) in [
        (seen, n_seen, ObjectTag::Seen),
        (unseen, n_unseen, ObjectTag::Unseen),
    ] {
        if k == 0 {
            continue;
        }
        let (idx, replaced) = draw_indices(source.len(), k, &mut rng);
        if replaced {
            metadata.insert(format!("mix_{tag}_with_replacement"), "true".into());
        }
        let mut uses = vec![0usize; source.len()];
        for i in idx {
            let mut r = source.records[i].clone();
            if uses[i] > 0 {
                r.sample_id = format!("{}~r{}", r.sample_id, uses[i]);
            }
            uses[i] += 1;
            r.object_tag = tag;
            records.push(r);
        }
    }
    records.shuffle(&mut rng);
    Ok(Trace {
        num_classes: seen.num_classes,
        records,
        metadata,
    })
}
