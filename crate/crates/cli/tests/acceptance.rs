//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::panic;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hgn_core::calibration::dirichlet::objective_and_gradient;
use hgn_core::calibration::{calibrate_trace, log_probs, CalibratorRegistry, FitConfig};
use hgn_core::controller::{
    confusion_counts, decide, ideal_model, metrics, outcome, DecisionOutcome, ModelChoice,
    ThresholdGrid,
};
use hgn_core::experience::{
    aggregate, cloud_only_point, edge_only_point, enacted_grasp, min_uii_threshold,
    operating_points, pareto_front, scenario, scenario_counts, uii, LatencyConfig, OperatingPoint,
    PenaltyTable, Scenario, ScenarioFlags,
};
use hgn_core::reliability::trace_ece;
use hgn_core::synth::{generate, generate_preset, marginals, BetaShape, LatencySpec, SynthParams};
use hgn_core::{PredictionRecord, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_trace(rng: &mut ChaCha8Rng, max_n: usize) -> Trace {
    let c = [2usize, 4, 13][rng.gen_range(0..3)];
    let (a, b) = (rng.gen_range(0.5..8.0), rng.gen_range(0.5..8.0));
    let mut t = generate(&SynthParams {
        n: rng.gen_range(1..=max_n),
        num_classes: c,
        edge_acc: rng.gen_range(0.0..=1.0),
        cloud_acc: rng.gen_range(0.0..=1.0),
        cloud_same_mistake: rng.gen_range(0.0..=1.0),
        sharpen: rng.gen_range(1.0..3.0),
        conf_correct: BetaShape::new(a, b),
        conf_incorrect: BetaShape::new(b, a),
        edge_latency: LatencySpec::Jitter {
            mean: 20.0,
            jitter: rng.gen_range(0.0..10.0),
        },
        cloud_latency: LatencySpec::Jitter {
            mean: 206.0,
            jitter: rng.gen_range(0.0..40.0),
        },
        seed: rng.gen(),
        ..SynthParams::default()
    })
    .expect("valid random parameters");
    // Put some top confidences exactly on bin edges and grid thresholds.
    for r in t.records.iter_mut() {
        if rng.gen_bool(0.1) {
            let lowest = (10.0 / c as f64).floor() as usize + 1;
            let top = rng.gen_range(lowest..=10) as f64 / 10.0;
            let pred = r.edge_pred();
            let rest = (1.0 - top) / (c - 1) as f64;
            r.edge_probs = (0..c).map(|j| if j == pred { top } else { rest }).collect();
        }
    }
    t
}

// 1 ------------------------------------------------------------------------

/// Record-level ECE: each record's bin is found by scanning the edges.
fn brute_force_ece(t: &Trace, bins: usize) -> f64 {
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    for r in &t.records {
        let (pred, conf) =
            r.edge_probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                    if p > best.1 {
                        (i, p)
                    } else {
                        best
                    }
                });
        let k = if conf == 0.0 {
            0
        } else {
            (0..bins)
                .find(|&k| conf > k as f64 / bins as f64 && conf <= (k + 1) as f64 / bins as f64)
                .expect("confidence in (0, 1]")
        };
        count[k] += 1;
        conf_sum[k] += conf;
        if pred == r.ground_truth {
            hits[k] += 1;
        }
    }
    let n = t.len() as f64;
    (0..bins)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let m = count[k] as f64;
            (m / n) * (hits[k] as f64 / m - conf_sum[k] / m).abs()
        })
        .sum()
}

fn c1_ece_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let t = random_trace(&mut rng, 10_000);
        for bins in [10, 1, 15] {
            let got = trace_ece(&t, bins).map_err(|e| e.to_string())?;
            let want = brute_force_ece(&t, bins);
            let d = (got - want).abs();
            worst = worst.max(d);
            ensure!(d <= 1e-12, "trace {i}, K={bins}: {got} vs {want}");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "100 traces x 3 bin counts, max |diff| {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// 2 ------------------------------------------------------------------------

fn c2_calibration_effectiveness() -> Outcome {
    let start = Instant::now();
    let trace = generate_preset("sharpened", 10_000, 2, 0.8).map_err(|e| e.to_string())?;
    let registry = CalibratorRegistry::with_builtins();
    let mut parts = Vec::new();
    let mut before = None;
    for m in ["ts", "dc"] {
        let run = calibrate_trace(
            &trace,
            registry.get(m).unwrap(),
            &FitConfig::default(),
            0.5,
            2,
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            run.report.ece_before > 0.05,
            "uncalibrated ECE {} not above 0.05",
            run.report.ece_before
        );
        ensure!(
            run.report.ece_after < 0.05,
            "{m} ECE {} not below 0.05",
            run.report.ece_after
        );
        before = Some(run.report.ece_before);
        parts.push(format!("{m} {:.4}", run.report.ece_after));
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "uncalibrated {:.4}, {}, {:.2}s",
        before.unwrap(),
        parts.join(", "),
        elapsed.as_secs_f64()
    ))
}

// 3 ------------------------------------------------------------------------

/// Regularised Dirichlet NLL written out directly from its definition.
fn dc_loss(c: usize, p: &[f64], logs: &[Vec<f64>], labels: &[usize], lambda: f64) -> f64 {
    let mut nll = 0.0;
    for (l, &y) in logs.iter().zip(labels) {
        let z: Vec<f64> = (0..c)
            .map(|i| (0..c).map(|j| p[i * c + j] * l[j]).sum::<f64>() + p[c * c + i])
            .collect();
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        nll -= (z[y].exp() / denom).ln();
    }
    nll /= logs.len() as f64;
    let mut off = 0.0;
    for i in 0..c {
        for j in 0..c {
            if i != j {
                off += p[i * c + j].powi(2);
            }
        }
    }
    let off_mean = if c > 1 {
        off / (c * (c - 1)) as f64
    } else {
        0.0
    };
    let b_mean = p[c * c..].iter().map(|v| v * v).sum::<f64>() / c as f64;
    nll + lambda * (off_mean + b_mean)
}

fn c3_dirichlet_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for inst in 0..20 {
        let c = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=20);
        let logs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| rng.gen_range(0.01..1.0)).collect();
                let s: f64 = raw.iter().sum();
                log_probs(&raw.iter().map(|v| v / s).collect::<Vec<_>>())
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let params: Vec<f64> = (0..c * c + c).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let lambda = [0.0, 1e-3, 0.5][inst % 3];
        let (_, grad) = objective_and_gradient(c, &params, &logs, &labels, lambda);
        let h = 1e-5;
        for k in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (dc_loss(c, &up, &logs, &labels, lambda)
                - dc_loss(c, &down, &logs, &labels, lambda))
                / (2.0 * h);
            let scale = grad[k].abs().max(fd.abs());
            let rel = if scale < 1e-8 {
                0.0
            } else {
                (grad[k] - fd).abs() / scale
            };
            worst = worst.max(rel);
            ensure!(
                rel <= 1e-3,
                "instance {inst}, parameter {k}: analytic {} vs numeric {fd}",
                grad[k]
            );
        }
    }
    Ok(format!("20 instances, max relative error {worst:.1e}"))
}

// 4 ------------------------------------------------------------------------

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn c4_controller_exactness() -> Outcome {
    let t = Trace::load(fixture_dir().join("controller_12.jsonl")).map_err(|e| e.to_string())?;
    let expected = std::fs::read_to_string(fixture_dir().join("controller_12.expected.csv"))
        .map_err(|e| e.to_string())?;
    let th = 0.5;
    for (r, line) in t.records.iter().zip(expected.lines().skip(1)) {
        let cols: Vec<&str> = line.split(',').collect();
        let o = match outcome(decide(r.edge_confidence(), th), ideal_model(r)) {
            DecisionOutcome::TruePositive => "TP",
            DecisionOutcome::FalsePositive => "FP",
            DecisionOutcome::FalseNegative => "FN",
            DecisionOutcome::TrueNegative => "TN",
        };
        ensure!(
            cols[0] == r.sample_id,
            "record order: {} vs {}",
            cols[0],
            r.sample_id
        );
        ensure!(
            o == cols[1],
            "{}: outcome {o}, expected {}",
            r.sample_id,
            cols[1]
        );
        let s = scenario(r, th).to_string();
        ensure!(
            s == cols[2],
            "{}: scenario {s}, expected {}",
            r.sample_id,
            cols[2]
        );
    }
    let c = confusion_counts(&t, th).map_err(|e| e.to_string())?;
    ensure!((c.tp, c.fp, c.fn_, c.tn) == (5, 1, 4, 2), "counts {c:?}");
    let m = metrics(&c);
    let want = [5.0 / 6.0, 5.0 / 9.0, 2.0 / 3.0, 2.0 / 3.0, 7.0 / 12.0];
    for (name, (got, w)) in ["precision", "recall", "f1", "specificity", "accuracy"]
        .iter()
        .zip(m.as_array().into_iter().zip(want))
    {
        let got = got.ok_or(format!("{name} undefined"))?;
        ensure!((got - w).abs() <= 1e-15, "{name} {got} vs {w}");
    }
    let sc = scenario_counts(&t, th);
    ensure!(sc.0 == [4, 2, 4, 1, 1], "scenario counts {:?}", sc.0);
    let u = uii(&t, th, &PenaltyTable::default()).map_err(|e| e.to_string())?;
    ensure!((u - 35.0 / 12.0).abs() <= 1e-15, "UII {u}");
    Ok("12 records: TP/FP/FN/TN 5/1/4/2, S1..S5 4/2/4/1/1, UII 35/12".into())
}

// 5 ------------------------------------------------------------------------

fn c5_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = LatencyConfig::default();
    let p = PenaltyTable::default();
    let mut violations = Vec::new();
    let mut checks = 0usize;
    for i in 0..1000 {
        let t = random_trace(&mut rng, 400);
        let grid: Vec<f64> = if i % 2 == 0 {
            ThresholdGrid::default_grid().values().to_vec()
        } else {
            let mut g: Vec<f64> = (0..rng.gen_range(1..30))
                .map(|_| rng.gen_range(0.0..=1.0))
                .collect();
            g.sort_by(f64::total_cmp);
            g
        };
        let mut prev: Option<(Option<f64>, Option<f64>, f64)> = None;
        for &th in &grid {
            checks += 1;
            let c = confusion_counts(&t, th).map_err(|e| e.to_string())?;
            if c.total() != t.len() {
                violations.push(format!(
                    "trace {i} θ={th}: total {} != {}",
                    c.total(),
                    t.len()
                ));
            }
            let m = metrics(&c);
            let off = aggregate("m", &t, th, &cfg, &p)
                .map_err(|e| e.to_string())?
                .offload_fraction;
            if let Some((r0, s0, o0)) = prev {
                if let (Some(a), Some(b)) = (r0, m.recall) {
                    if b > a {
                        violations.push(format!("trace {i} θ={th}: recall rose {a} -> {b}"));
                    }
                }
                if let (Some(a), Some(b)) = (s0, m.specificity) {
                    if b < a {
                        violations.push(format!("trace {i} θ={th}: specificity fell {a} -> {b}"));
                    }
                }
                if off < o0 {
                    violations.push(format!("trace {i} θ={th}: offload fell {o0} -> {off}"));
                }
            }
            prev = Some((m.recall, m.specificity, off));
        }
    }
    ensure!(
        violations.is_empty(),
        "{} violations, first: {}",
        violations.len(),
        violations[0]
    );
    Ok(format!("1000 traces, {checks} thresholds, 0 violations"))
}

// 6 ------------------------------------------------------------------------

fn c6_scenario_partition() -> Outcome {
    let mut feasible = 0;
    for bits in 0..16u8 {
        let f = ScenarioFlags {
            edge_correct: bits & 1 != 0,
            offloaded: bits & 2 != 0,
            cloud_correct: bits & 4 != 0,
            same: bits & 8 != 0,
        };
        if f.feasible() {
            feasible += 1;
            let m = f.matching();
            ensure!(m.len() == 1, "{f:?} matches {m:?}");
            ensure!(
                m[0] == f.scenario(),
                "{f:?}: classifier {} vs predicate {}",
                f.scenario(),
                m[0]
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = LatencyConfig::default();
    let p = PenaltyTable::default();
    for i in 0..100 {
        let t = random_trace(&mut rng, 2000);
        for &th in ThresholdGrid::default_grid().values() {
            let op = aggregate("m", &t, th, &cfg, &p).map_err(|e| e.to_string())?;
            let direct = t
                .records
                .iter()
                .filter(|r| enacted_grasp(r, th) == r.ground_truth)
                .count() as f64
                / t.len() as f64;
            ensure!(
                op.final_accuracy == direct,
                "trace {i} θ={th}: {} vs {direct}",
                op.final_accuracy
            );
        }
    }
    Ok(format!("{feasible} feasible flag combinations each in exactly one scenario; accuracy identity exact on 100 traces x 21 thresholds"))
}

// 7 ------------------------------------------------------------------------

fn above(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn c7_threshold_endpoints() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = LatencyConfig::default();
    let p = PenaltyTable::default();
    let mut traces: Vec<Trace> = (0..100).map(|_| random_trace(&mut rng, 1000)).collect();
    for name in ["unseen-only", "seen", "mix-80-20"] {
        traces.push(generate_preset(name, 2000, 7, 0.8).map_err(|e| e.to_string())?);
    }
    for (i, t) in traces.iter().enumerate() {
        let at0 = aggregate("m", t, 0.0, &cfg, &p).map_err(|e| e.to_string())?;
        let sc = scenario_counts(t, 0.0);
        ensure!(
            sc.get(Scenario::S2) + sc.get(Scenario::S4) + sc.get(Scenario::S5) == 0,
            "trace {i}: {:?} at θ=0",
            sc.0
        );
        let mean_edge = t.records.iter().map(|r| r.edge_latency_ms).sum::<f64>() / t.len() as f64;
        ensure!(
            (at0.mean_latency_ms - mean_edge).abs() <= 1e-9 * mean_edge,
            "trace {i}: latency {} vs {mean_edge}",
            at0.mean_latency_ms
        );
        let m0 = metrics(&confusion_counts(t, 0.0).map_err(|e| e.to_string())?);
        let positives = t
            .records
            .iter()
            .filter(|r| ideal_model(r) == ModelChoice::Edge)
            .count();
        if positives > 0 {
            ensure!(
                m0.recall == Some(1.0),
                "trace {i}: recall {:?} at θ=0",
                m0.recall
            );
        }

        let max_conf = t
            .records
            .iter()
            .map(PredictionRecord::edge_confidence)
            .fold(0.0, f64::max);
        let th = above(max_conf);
        let hi = aggregate("m", t, th, &cfg, &p).map_err(|e| e.to_string())?;
        ensure!(
            hi.offload_fraction == 1.0,
            "trace {i}: offload {} above max confidence",
            hi.offload_fraction
        );
        let m1 = metrics(&confusion_counts(t, th).map_err(|e| e.to_string())?);
        if positives < t.len() {
            ensure!(
                m1.specificity == Some(1.0),
                "trace {i}: specificity {:?}",
                m1.specificity
            );
        }
    }
    Ok(format!("{} traces: θ=0 gives only S1/S3, edge latency and recall 1; θ above max confidence offloads all with specificity 1", traces.len()))
}

// 8 ------------------------------------------------------------------------

fn c8_shape_reproduction() -> Outcome {
    let start = Instant::now();
    let trace = generate_preset("unseen-only", 10_000, 8, 0.8).map_err(|e| e.to_string())?;
    let m = marginals(&trace);
    ensure!(
        (m.edge_acc - 0.367).abs() < 0.015,
        "edge accuracy {}",
        m.edge_acc
    );
    ensure!(
        (m.cloud_acc - 0.502).abs() < 0.015,
        "cloud accuracy {}",
        m.cloud_acc
    );
    ensure!(
        m.mean_confidence > m.edge_acc + 0.1,
        "preset is not overconfident: {}",
        m.mean_confidence
    );

    let registry = CalibratorRegistry::with_builtins();
    let run = calibrate_trace(
        &trace,
        registry.get("dc").unwrap(),
        &FitConfig::default(),
        0.5,
        8,
    )
    .map_err(|e| e.to_string())?;
    let t = &run.calibrated;
    let cfg = LatencyConfig::default();
    let p = PenaltyTable::default();
    let grid = ThresholdGrid::default_grid();
    let (best, best_uii) = min_uii_threshold(t, grid.values(), &p).map_err(|e| e.to_string())?;
    ensure!(best > 0.0 && best < 1.0, "UII minimum at θ={best}");

    let edge = edge_only_point(t, &cfg, &p).map_err(|e| e.to_string())?;
    let cloud = cloud_only_point(t, &cfg, &p).map_err(|e| e.to_string())?;
    ensure!(
        (cloud.mean_latency_ms - 256.0).abs() < 1e-9,
        "cloud-only latency {}",
        cloud.mean_latency_ms
    );
    let hgn = operating_points("dc", t, grid.values(), &cfg, &p).map_err(|e| e.to_string())?;
    let mut all: Vec<OperatingPoint> = vec![edge.clone(), cloud.clone()];
    all.extend(hgn);
    let same_spot = |a: &OperatingPoint, b: &OperatingPoint| {
        a.final_accuracy == b.final_accuracy && a.mean_latency_ms == b.mean_latency_ms
    };
    let new_points = pareto_front(&all)
        .iter()
        .filter(|q| q.method == "dc" && !same_spot(q, &edge) && !same_spot(q, &cloud))
        .count();
    ensure!(new_points > 0, "no HGN point extends the two-point front");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "edge {:.3} / cloud {:.3}; θ*={best} (UII {best_uii:.3}); {} new non-dominated points; {:.2}s",
        m.edge_acc,
        m.cloud_acc,
        new_points,
        elapsed.as_secs_f64()
    ))
}

// 9 ------------------------------------------------------------------------

fn hgn(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hgn"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "hgn {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.is_file() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn c9_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let mut compared = 0usize;
    for round in ["a", "b"] {
        let dir = root.join(round);
        let d = |sub: &str| dir.join(sub).to_str().unwrap().to_string();
        std::fs::create_dir_all(d("synth")).map_err(|e| e.to_string())?;
        let synth_out = d("synth/mix.jsonl");
        let commands: Vec<Vec<String>> = vec![
            vec![
                "synth",
                "--preset",
                "mix-80-20",
                "--n",
                "3000",
                "--seed",
                "9",
                "--out",
                &synth_out,
            ],
            vec!["validate", "--trace", &synth_out],
            vec![
                "calibrate",
                "--trace",
                &synth_out,
                "--method",
                "dc",
                "--seed",
                "9",
                "--out",
                &d("calibrate"),
            ],
            vec![
                "calibrate",
                "--trace",
                &synth_out,
                "--method",
                "dac",
                "--seed",
                "9",
                "--out",
                &d("calibrate-dac"),
            ],
            vec![
                "reliability",
                "--trace",
                &synth_out,
                "--tag",
                "unseen",
                "--out",
                &d("reliability"),
            ],
            vec!["sweep", "--trace", &synth_out, "--out", &d("sweep")],
            vec![
                "report",
                "--trace",
                &synth_out,
                "--method",
                "none,ts,dc,dac,hist",
                "--seed",
                "9",
                "--out",
                &d("report"),
            ],
            vec![
                "pareto",
                "--points",
                &format!(
                    "{},{}",
                    d("report/operating_points.csv"),
                    d("report/baselines.csv")
                ),
                "--out",
                &d("pareto"),
            ],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        let mut stdout = Vec::new();
        for c in &commands {
            let args: Vec<&str> = c.iter().map(String::as_str).collect();
            stdout.push(hgn(&args)?);
        }
        std::fs::write(dir.join("stdout.txt"), stdout.concat()).map_err(|e| e.to_string())?;
    }
    for sub in [
        "synth",
        "calibrate",
        "calibrate-dac",
        "reliability",
        "sweep",
        "report",
        "pareto",
        ".",
    ] {
        let a = snapshot(&root.join("a").join(sub))?;
        let b = snapshot(&root.join("b").join(sub))?;
        ensure!(a.keys().eq(b.keys()), "{sub}: different file sets");
        ensure!(!a.is_empty(), "{sub}: no outputs");
        for (name, bytes) in &a {
            ensure!(bytes == &b[name], "{sub}/{name} differs between runs");
            if name.ends_with(".svg") {
                let text = String::from_utf8(bytes.clone()).map_err(|e| e.to_string())?;
                roxmltree::Document::parse(&text).map_err(|e| format!("{sub}/{name}: {e}"))?;
            }
            compared += 1;
        }
    }
    Ok(format!(
        "8 commands run twice, {compared} output files byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ECE oracle equivalence", c1_ece_oracle),
        ("calibration effectiveness", c2_calibration_effectiveness),
        ("Dirichlet gradient check", c3_dirichlet_gradient),
        ("controller exactness", c4_controller_exactness),
        ("monotonicity suite", c5_monotonicity),
        ("scenario partition", c6_scenario_partition),
        ("threshold endpoints", c7_threshold_endpoints),
        ("shape reproduction", c8_shape_reproduction),
        ("determinism", c9_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let result = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {id}: {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
