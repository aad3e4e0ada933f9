//! Synthetic trace generation with controlled accuracy, confidence
//! distributions and miscalibration.
//!
//! Every record draws from its own ChaCha stream keyed by `(seed, index)`, so
//! output does not depend on generation order.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal};

use crate::error::{HgnError, Result};
use crate::trace::{mix_traces, ObjectTag, PredictionRecord, Trace};

/// Shape pair of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        BetaShape { alpha, beta }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencySpec {
    Constant(f64),
    /// Uniform in `[mean - jitter, mean + jitter]`, clamped at zero.
    Jitter {
        mean: f64,
        jitter: f64,
    },
}

impl LatencySpec {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            LatencySpec::Constant(v) => v,
            LatencySpec::Jitter { mean, jitter } => {
                if jitter == 0.0 {
                    mean
                } else {
                    (mean + rng.gen_range(-jitter..=jitter)).max(0.0)
                }
            }
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            LatencySpec::Constant(v) => v.is_finite() && v >= 0.0,
            LatencySpec::Jitter { mean, jitter } => {
                mean.is_finite() && jitter.is_finite() && mean >= 0.0 && jitter >= 0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub num_classes: usize,
    pub edge_acc: f64,
    pub cloud_acc: f64,
    /// P(cloud correct | edge wrong). `None` makes cloud correctness
    /// independent of edge correctness.
    pub cloud_given_edge_wrong: Option<f64>,
    /// P(cloud repeats the edge misprediction | both wrong).
    pub cloud_same_mistake: f64,
    pub conf_correct: BetaShape,
    pub conf_incorrect: BetaShape,
    /// Exponent applied to the probability vector before renormalising.
    pub sharpen: f64,
    pub edge_latency: LatencySpec,
    pub cloud_latency: LatencySpec,
    pub unseen_fraction: f64,
    /// Length of the feature vector attached to each record; 0 for none.
    pub feature_dim: usize,
    /// Standard deviation of features for edge-incorrect records (edge-correct
    /// records use 1), which puts mistakes in sparser regions.
    pub feature_spread_incorrect: f64,
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 1000,
            num_classes: 13,
            edge_acc: 0.6,
            cloud_acc: 0.8,
            cloud_given_edge_wrong: None,
            cloud_same_mistake: 0.5,
            conf_correct: BetaShape::new(5.0, 2.0),
            conf_incorrect: BetaShape::new(4.0, 3.0),
            sharpen: 1.0,
            edge_latency: LatencySpec::Constant(20.0),
            cloud_latency: LatencySpec::Constant(206.0),
            unseen_fraction: 0.0,
            feature_dim: 0,
            feature_spread_incorrect: 1.0,
            id_prefix: "syn".into(),
            seed: 0,
        }
    }
}

impl SynthParams {
    /// Beta shapes for which the top confidence equals the probability of
    /// being correct: with `conf ~ Beta(a, b)` and `correct | conf ~
    /// Bernoulli(conf)`, the conditionals are `Beta(a+1, b)` and `Beta(a, b+1)`
    /// and the marginal accuracy is `a / (a + b)`.
    pub fn calibrated(edge_acc: f64, concentration: f64) -> Self {
        let a = edge_acc * concentration;
        let b = (1.0 - edge_acc) * concentration;
        SynthParams {
            edge_acc,
            conf_correct: BetaShape::new(a + 1.0, b),
            conf_incorrect: BetaShape::new(a, b + 1.0),
            ..SynthParams::default()
        }
    }

    /// P(cloud correct | edge correct) implied by the marginals.
    fn cloud_given_edge_right(&self) -> f64 {
        match self.cloud_given_edge_wrong {
            None => self.cloud_acc,
            Some(q) if self.edge_acc > 0.0 => {
                (self.cloud_acc - (1.0 - self.edge_acc) * q) / self.edge_acc
            }
            Some(_) => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(HgnError::param(name, format!("{v} is outside [0,1]")))
            }
        };
        if self.num_classes < 2 {
            return Err(HgnError::param("num_classes", "need at least 2 classes"));
        }
        unit("edge_acc", self.edge_acc)?;
        unit("cloud_acc", self.cloud_acc)?;
        unit("cloud_same_mistake", self.cloud_same_mistake)?;
        unit("unseen_fraction", self.unseen_fraction)?;
        if let Some(q) = self.cloud_given_edge_wrong {
            unit("cloud_given_edge_wrong", q)?;
            let p = self.cloud_given_edge_right();
            if !(-1e-12..=1.0 + 1e-12).contains(&p) {
                return Err(HgnError::param(
                    "cloud_given_edge_wrong",
                    format!("implies P(cloud right | edge right) = {p:.4}, outside [0,1]"),
                ));
            }
        }
        for (name, s) in [
            ("conf_correct", self.conf_correct),
            ("conf_incorrect", self.conf_incorrect),
        ] {
            if !(s.alpha > 0.0 && s.beta > 0.0 && s.alpha.is_finite() && s.beta.is_finite()) {
                return Err(HgnError::param(
                    name,
                    "Beta shapes must be positive and finite",
                ));
            }
        }
        if !(self.sharpen >= 1.0 && self.sharpen.is_finite()) {
            return Err(HgnError::param(
                "sharpen",
                format!("{} must be >= 1", self.sharpen),
            ));
        }
        if !self.edge_latency.is_valid() {
            return Err(HgnError::param(
                "edge_latency",
                "must be finite and nonnegative",
            ));
        }
        if !self.cloud_latency.is_valid() {
            return Err(HgnError::param(
                "cloud_latency",
                "must be finite and nonnegative",
            ));
        }
        if !(self.feature_spread_incorrect > 0.0 && self.feature_spread_incorrect.is_finite()) {
            return Err(HgnError::param(
                "feature_spread_incorrect",
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Uniform draw from `0..c` excluding every class in `skip`.
fn draw_other(rng: &mut impl Rng, c: usize, skip: &[usize]) -> usize {
    let mut skip: Vec<usize> = skip.to_vec();
    skip.sort_unstable();
    skip.dedup();
    let mut k = rng.gen_range(0..c - skip.len());
    for s in skip {
        if k >= s {
            k += 1;
        }
    }
    k
}

/// Builds a probability vector with `top` on `pred` and the rest spread by a
/// symmetric Dirichlet(1) draw, keeping `pred` the strict argmax.
fn build_probs(rng: &mut impl Rng, c: usize, pred: usize, top: f64) -> Vec<f64> {
    let floor = 1.0 / c as f64 + 1e-6;
    let top = top.clamp(floor.min(1.0), 1.0);
    let rest = 1.0 - top;
    let mut p = vec![0.0; c];
    let draws: Vec<f64> = (0..c - 1).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let mut others: Vec<f64> = draws.iter().map(|d| rest * d / total).collect();

    // Cap residual entries strictly below `top`, pushing the excess onto the
    // uncapped ones. Feasible because top > 1/C.
    let cap = top * (1.0 - 1e-9);
    loop {
        let excess: f64 = others.iter().map(|&x| (x - cap).max(0.0)).sum();
        if excess <= 0.0 {
            break;
        }
        let free: f64 = others.iter().filter(|&&x| x < cap).sum();
        let n_free = others.iter().filter(|&&x| x < cap).count();
        for x in others.iter_mut() {
            if *x >= cap {
                *x = cap;
            } else if free > 0.0 {
                *x += excess * *x / free;
            } else {
                *x += excess / n_free as f64;
            }
        }
    }
    let mut j = 0;
    for (i, slot) in p.iter_mut().enumerate() {
        if i == pred {
            *slot = top;
        } else {
            *slot = others[j];
            j += 1;
        }
    }
    p
}

fn sharpen(p: &mut [f64], gamma: f64) {
    if gamma == 1.0 {
        return;
    }
    for x in p.iter_mut() {
        *x = x.powf(gamma);
    }
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= s;
    }
}

fn generate_record(
    params: &SynthParams,
    index: usize,
    p_cloud_right_edge_right: f64,
) -> PredictionRecord {
    let c = params.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64);

    let pred = rng.gen_range(0..c);
    let edge_right = rng.gen_bool(params.edge_acc);
    let shape = if edge_right {
        params.conf_correct
    } else {
        params.conf_incorrect
    };
    let top: f64 = Beta::new(shape.alpha, shape.beta)
        .expect("validated Beta shape")
        .sample(&mut rng);
    let mut probs = build_probs(&mut rng, c, pred, top);
    // A wrong label falls on another class in proportion to its probability,
    // so the whole unsharpened vector is calibrated, not only its top entry.
    let y = if edge_right {
        pred
    } else {
        let weights: Vec<f64> = (0..c)
            .map(|j| if j == pred { 0.0 } else { probs[j] })
            .collect();
        match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(&mut rng),
            Err(_) => draw_other(&mut rng, c, &[pred]),
        }
    };

    let p_cloud = if edge_right {
        p_cloud_right_edge_right.clamp(0.0, 1.0)
    } else {
        params.cloud_given_edge_wrong.unwrap_or(params.cloud_acc)
    };
    let cloud_right = rng.gen_bool(p_cloud);
    let cloud_pred = if cloud_right {
        y
    } else if edge_right {
        draw_other(&mut rng, c, &[y])
    } else if c == 2 || rng.gen_bool(params.cloud_same_mistake) {
        pred
    } else {
        draw_other(&mut rng, c, &[y, pred])
    };

    sharpen(&mut probs, params.sharpen);

    let edge_latency_ms = params.edge_latency.sample(&mut rng);
    let cloud_latency_ms = params.cloud_latency.sample(&mut rng);
    let object_tag = if rng.gen_bool(params.unseen_fraction) {
        ObjectTag::Unseen
    } else {
        ObjectTag::Seen
    };
    let features = (params.feature_dim > 0).then(|| {
        let sd = if edge_right {
            1.0
        } else {
            params.feature_spread_incorrect
        };
        (0..params.feature_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    });

    PredictionRecord {
        sample_id: format!("{}-{index:06}", params.id_prefix),
        object_tag,
        ground_truth: y,
        edge_probs: probs,
        edge_latency_ms,
        cloud_pred,
        cloud_latency_ms,
        features,
    }
}

pub fn generate(params: &SynthParams) -> Result<Trace> {
    params.validate()?;
    let p_right = params.cloud_given_edge_right();
    let records = (0..params.n)
        .map(|i| generate_record(params, i, p_right))
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("source".to_string(), "synth".to_string());
    metadata.insert("seed".to_string(), params.seed.to_string());
    Ok(Trace {
        num_classes: params.num_classes,
        records,
        metadata,
    })
}

/// Edge and cloud accuracy observed in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginals {
    pub n: usize,
    pub edge_acc: f64,
    pub cloud_acc: f64,
    pub cloud_given_edge_wrong: Option<f64>,
    pub unseen_fraction: f64,
    pub mean_confidence: f64,
}

pub fn marginals(trace: &Trace) -> Marginals {
    let n = trace.len();
    let frac = |k: usize, d: usize| {
        if d == 0 {
            f64::NAN
        } else {
            k as f64 / d as f64
        }
    };
    let edge = trace.records.iter().filter(|r| r.edge_correct()).count();
    let cloud = trace.records.iter().filter(|r| r.cloud_correct()).count();
    let wrong: Vec<_> = trace.records.iter().filter(|r| !r.edge_correct()).collect();
    let cloud_fix = wrong.iter().filter(|r| r.cloud_correct()).count();
    let unseen = trace
        .records
        .iter()
        .filter(|r| r.object_tag == ObjectTag::Unseen)
        .count();
    let conf: f64 = trace.records.iter().map(|r| r.edge_confidence()).sum();
    Marginals {
        n,
        edge_acc: frac(edge, n),
        cloud_acc: frac(cloud, n),
        cloud_given_edge_wrong: (!wrong.is_empty()).then(|| frac(cloud_fix, wrong.len())),
        unseen_fraction: frac(unseen, n),
        mean_confidence: if n == 0 { f64::NAN } else { conf / n as f64 },
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "unseen-only",
    "seen",
    "mix-80-20",
    "sharpened",
    "calibrated",
];

/// Edge accuracy on unseen object types.
pub const UNSEEN_EDGE_ACC: f64 = 0.367;
/// Cloud accuracy on unseen object types.
pub const UNSEEN_CLOUD_ACC: f64 = 0.502;
/// Edge accuracy on seen object types.
pub const SEEN_EDGE_ACC: f64 = 0.803;
/// Cloud accuracy over the 80/20 seen/unseen mix.
pub const MIX_CLOUD_ACC: f64 = 0.884;
/// Seen-split cloud accuracy that yields [`MIX_CLOUD_ACC`] once mixed 80/20
/// with the unseen split.
pub const SEEN_CLOUD_ACC: f64 = (MIX_CLOUD_ACC - 0.2 * UNSEEN_CLOUD_ACC) / 0.8;

pub const DEFAULT_EDGE_LATENCY_MS: f64 = 20.0;
/// Cloud inference time excluding the network round trip.
pub const DEFAULT_CLOUD_LATENCY_MS: f64 = 206.0;

/// Feature dimension and spread attached to every preset.
const PRESET_FEATURE_DIM: usize = 4;
const PRESET_FEATURE_SPREAD: f64 = 2.0;

fn with_features(p: SynthParams) -> SynthParams {
    SynthParams {
        feature_dim: PRESET_FEATURE_DIM,
        feature_spread_incorrect: PRESET_FEATURE_SPREAD,
        ..p
    }
}

/// Overconfident parameters around a calibrated base.
fn overconfident(edge_acc: f64, cloud_acc: f64, tag_unseen: bool, prefix: &str) -> SynthParams {
    SynthParams {
        cloud_acc,
        sharpen: 2.0,
        unseen_fraction: if tag_unseen { 1.0 } else { 0.0 },
        edge_latency: LatencySpec::Constant(DEFAULT_EDGE_LATENCY_MS),
        cloud_latency: LatencySpec::Constant(DEFAULT_CLOUD_LATENCY_MS),
        id_prefix: prefix.into(),
        ..SynthParams::calibrated(edge_acc, 6.0)
    }
}

/// Parameters for the single-source presets. `mix-80-20` is composed from
/// two of these by [`generate_preset`].
pub fn preset(name: &str, n: usize, seed: u64) -> Result<SynthParams> {
    let base = match name {
        "unseen-only" => overconfident(UNSEEN_EDGE_ACC, UNSEEN_CLOUD_ACC, true, "unseen"),
        "seen" => overconfident(SEEN_EDGE_ACC, SEEN_CLOUD_ACC, false, "seen"),
        "sharpened" => SynthParams {
            sharpen: 2.0,
            ..SynthParams::calibrated(0.6, 6.0)
        },
        "calibrated" => SynthParams::calibrated(0.6, 6.0),
        "mix-80-20" => {
            return Err(HgnError::param(
                "preset",
                "`mix-80-20` is composite; use generate_preset",
            ))
        }
        other => {
            return Err(HgnError::param(
                "preset",
                format!(
                    "unknown preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                ),
            ))
        }
    };
    Ok(SynthParams {
        n,
        seed,
        ..with_features(base)
    })
}

/// Generates a named preset. `mix-80-20` draws a seen and an unseen pool and
/// composes them with `seen_fraction` of seen records.
pub fn generate_preset(name: &str, n: usize, seed: u64, seen_fraction: f64) -> Result<Trace> {
    if name != "mix-80-20" {
        let mut t = generate(&preset(name, n, seed)?)?;
        t.metadata.insert("preset".into(), name.into());
        return Ok(t);
    }
    let n_seen = (n as f64 * seen_fraction).round() as usize;
    let seen = generate(&preset("seen", n_seen, seed)?)?;
    let unseen = generate(&preset("unseen-only", n - n_seen, seed.wrapping_add(1))?)?;
    let mut t = mix_traces(&seen, &unseen, seen_fraction, n, seed)?;
    t.metadata.insert("preset".into(), name.into());
    t.metadata.insert("seed".into(), seed.to_string());
    t.metadata.insert("source".into(), "synth".into());
    Ok(t)
}
