use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hgn_core::calibration::{
    calibrate_trace, CalibrationModel, CalibratorRegistry, FitConfig, FitReport,
};
use hgn_core::controller::{sweep as sweep_metrics, SweepResult, ThresholdGrid};
use hgn_core::experience::{
    cloud_only_point, edge_only_point, min_uii_threshold, operating_points, operating_points_csv,
    pareto_csv, pareto_flags, pareto_front, parse_operating_points, scenario_csv,
    scenario_distribution, LatencyConfig, OperatingPoint, PenaltyTable, Scenario,
};
use hgn_core::reliability::{bin_stats, trace_ece, ReliabilityReport};
use hgn_core::svg::{Chart, Series};
use hgn_core::synth::{self, SynthParams};
use hgn_core::{ObjectTag, Trace};

use crate::{
    flag, load_trace, out_dir, write_file, CalibrateArgs, FitArgs, ParetoArgs, ReliabilityArgs,
    ReportArgs, SweepArgs, SynthArgs, TraceArg,
};

fn fit_config(a: &FitArgs) -> Result<FitConfig> {
    if a.bins == 0 {
        bail!("invalid --bins: must be at least 1");
    }
    if !(a.lambda.is_finite() && a.lambda >= 0.0) {
        bail!(
            "invalid --lambda: {} must be finite and nonnegative",
            a.lambda
        );
    }
    if a.k == 0 {
        bail!("invalid --k: must be at least 1");
    }
    if !(a.fit_split > 0.0 && a.fit_split < 1.0) {
        bail!(
            "invalid --fit-split: {} must be strictly between 0 and 1",
            a.fit_split
        );
    }
    Ok(FitConfig {
        bins: a.bins,
        dc_lambda: a.lambda,
        dac_k: a.k,
    })
}

fn grid(spec: &str) -> Result<Vec<f64>> {
    Ok(flag(ThresholdGrid::parse(spec), "--grid")?
        .values()
        .to_vec())
}

fn report_lines(r: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method={}", r.method);
    let _ = writeln!(s, "nll_before={}", r.nll_before);
    let _ = writeln!(s, "nll_after={}", r.nll_after);
    let _ = writeln!(s, "ece_before={}", r.ece_before);
    let _ = writeln!(s, "ece_after={}", r.ece_after);
    let _ = writeln!(s, "iterations={}", r.iterations);
    let _ = writeln!(s, "converged={}", r.converged);
    for n in &r.notes {
        let _ = writeln!(s, "note={n}");
    }
    s
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.mix_seen_fraction) {
        bail!(
            "invalid --mix-seen-fraction: {} must be in [0, 1]",
            a.mix_seen_fraction
        );
    }
    let trace = match &a.preset {
        Some(name) => flag(
            synth::generate_preset(name, a.n, a.seed, a.mix_seen_fraction),
            "--preset",
        )?,
        None => {
            let base =
                SynthParams::calibrated(a.edge_acc.unwrap_or(0.6), a.concentration.unwrap_or(6.0));
            let params = SynthParams {
                n: a.n,
                seed: a.seed,
                cloud_acc: a.cloud_acc.unwrap_or(base.cloud_acc),
                num_classes: a.num_classes.unwrap_or(base.num_classes),
                sharpen: a.sharpen.unwrap_or(1.0),
                feature_dim: a.feature_dim.unwrap_or(0),
                ..base
            };
            synth::generate(&params)
                .map_err(|e| anyhow::anyhow!("invalid synth parameters: {e}"))?
        }
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("--out: cannot create {}", parent.display()))?;
    }
    trace
        .save(&a.out)
        .with_context(|| format!("--out: cannot write {}", a.out.display()))?;
    let m = synth::marginals(&trace);
    println!("records={}", m.n);
    println!("edge_accuracy={:.4}", m.edge_acc);
    println!("cloud_accuracy={:.4}", m.cloud_acc);
    match m.cloud_given_edge_wrong {
        Some(v) => println!("cloud_accuracy_when_edge_wrong={v:.4}"),
        None => println!("cloud_accuracy_when_edge_wrong="),
    }
    println!("unseen_fraction={:.4}", m.unseen_fraction);
    println!("mean_confidence={:.4}", m.mean_confidence);
    Ok(())
}

pub fn validate(a: &TraceArg) -> Result<()> {
    let t = load_trace(&a.trace)?;
    let violations = t.validate();
    if violations.is_empty() {
        println!("ok: {} records, {} classes", t.len(), t.num_classes);
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    bail!(
        "--trace {}: {} violation(s)",
        a.trace.display(),
        violations.len()
    )
}

pub fn calibrate(a: &CalibrateArgs) -> Result<()> {
    let trace = load_trace(&a.trace)?;
    let cfg = fit_config(&a.fit)?;
    out_dir(&a.out)?;
    if let Some(path) = &a.model {
        let model =
            CalibrationModel::load(path).with_context(|| format!("--model {}", path.display()))?;
        let calibrated = model.apply_trace(&trace)?;
        calibrated.save(a.out.join("calibrated.jsonl"))?;
        println!("model={}", model.variant_name());
        println!("ece_before={}", trace_ece(&trace, cfg.bins)?);
        println!("ece_after={}", trace_ece(&calibrated, cfg.bins)?);
        return Ok(());
    }
    let registry = CalibratorRegistry::with_builtins();
    let calibrator = flag(registry.get(&a.method), "--method")?;
    let run = calibrate_trace(&trace, calibrator, &cfg, a.fit.fit_split, a.fit.seed)?;
    run.calibrated.save(a.out.join("calibrated.jsonl"))?;
    run.uncalibrated.save(a.out.join("eval.jsonl"))?;
    run.model.save(a.out.join("model.json"))?;
    let text = report_lines(&run.report);
    write_file(&a.out, "fit_report.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn reliability_svg(reports: &[(&str, &ReliabilityReport)]) -> String {
    let mut series = vec![Series::new("ideal", vec![(0.0, 0.0), (1.0, 1.0)])];
    for (name, r) in reports {
        let pts = r
            .bins
            .iter()
            .filter_map(|b| Some((b.mean_conf?, b.accuracy?)))
            .collect();
        series.push(Series::new(format!("{name} (ECE {:.3})", r.ece), pts));
    }
    Chart::new("Reliability", "confidence", "accuracy")
        .x_range(0.0, 1.0)
        .y_range(0.0, 1.0)
        .line(&series)
}

pub fn reliability(a: &ReliabilityArgs) -> Result<()> {
    let trace = load_trace(&a.trace)?;
    let subset = match a.tag.as_str() {
        "all" => trace,
        other => {
            let tag: ObjectTag = other.parse().map_err(|_| {
                anyhow::anyhow!("invalid --tag: `{other}` (expected seen, unseen or all)")
            })?;
            trace.split_by_tag(tag)
        }
    };
    if a.bins == 0 {
        bail!("invalid --bins: must be at least 1");
    }
    if subset.is_empty() {
        bail!("--tag {}: no records with this tag", a.tag);
    }
    let report = bin_stats(&subset, a.bins)?;
    out_dir(&a.out)?;
    write_file(&a.out, "reliability.csv", &report.to_csv())?;
    write_file(
        &a.out,
        "reliability.svg",
        &reliability_svg(&[(a.tag.as_str(), &report)]),
    )?;
    println!("records={}", report.n);
    println!("ece={}", report.ece);
    println!("direction={:?}", report.direction());
    Ok(())
}

fn sweep_svg(result: &SweepResult, title: &str) -> String {
    let names = ["precision", "recall", "f1", "specificity", "accuracy"];
    let series: Vec<Series> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let pts = result
                .rows
                .iter()
                .filter_map(|r| Some((r.threshold, r.metrics.as_array()[i]?)))
                .collect();
            Series::new(*n, pts)
        })
        .collect();
    Chart::new(title, "threshold", "metric")
        .x_range(0.0, 1.0)
        .y_range(0.0, 1.0)
        .line(&series)
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let thresholds = grid(&a.grid)?;
    if a.bins == 0 {
        bail!("invalid --bins: must be at least 1");
    }
    let trace = load_trace(&a.trace)?;
    let result = sweep_metrics(&trace, &thresholds)?;
    let rel = bin_stats(&trace, a.bins)?;
    out_dir(&a.out)?;
    write_file(&a.out, "sweep.csv", &result.to_csv())?;
    write_file(&a.out, "reliability.csv", &rel.to_csv())?;
    write_file(
        &a.out,
        "sweep.svg",
        &sweep_svg(&result, "Decision metrics vs threshold"),
    )?;
    println!("thresholds={}", result.rows.len());
    println!("ece={}", rel.ece);
    Ok(())
}

fn pareto_svg(points: &[OperatingPoint]) -> String {
    let flags = pareto_flags(points);
    let mut methods: Vec<&str> = Vec::new();
    for p in points {
        if !methods.contains(&p.method.as_str()) {
            methods.push(&p.method);
        }
    }
    let mut series: Vec<Series> = methods
        .iter()
        .map(|m| {
            let pts = points
                .iter()
                .filter(|p| p.method == *m)
                .map(|p| (p.mean_latency_ms, p.final_accuracy))
                .collect();
            Series::new(*m, pts)
        })
        .collect();
    let front: Vec<(f64, f64)> = points
        .iter()
        .zip(&flags)
        .filter(|(_, f)| **f)
        .map(|(p, _)| (p.mean_latency_ms, p.final_accuracy))
        .collect();
    let mut front_sorted = front;
    front_sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    series.push(Series::new("pareto front", front_sorted));
    Chart::new("Accuracy vs latency", "mean latency (ms)", "final accuracy").scatter(&series)
}

fn parse_methods(spec: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for m in spec.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        if !out.iter().any(|x| x == m) {
            out.push(m.to_string());
        }
    }
    if out.is_empty() {
        bail!("invalid --method: no methods given");
    }
    Ok(out)
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let cfg = fit_config(&a.fit)?;
    let thresholds = grid(&a.eval.grid)?;
    let latency = flag(
        LatencyConfig::new(a.eval.rtt_ms, a.eval.deadline_ms),
        "latency flags",
    )?;
    let penalties = flag(PenaltyTable::parse(&a.eval.penalties), "--penalties")?;
    let methods = parse_methods(&a.method)?;
    let registry = CalibratorRegistry::with_builtins();
    let calibrators = methods
        .iter()
        .map(|m| flag(registry.get(m), "--method"))
        .collect::<Result<Vec<_>>>()?;
    let trace = load_trace(&a.trace)?;
    out_dir(&a.out)?;

    let mut points = Vec::new();
    let mut uii_series = Vec::new();
    let mut summary = String::from("method,threshold,uii,ece_before,ece_after\n");
    let mut eval_split: Option<Trace> = None;
    for (name, calibrator) in methods.iter().zip(calibrators) {
        let run = calibrate_trace(&trace, calibrator, &cfg, a.fit.fit_split, a.fit.seed)?;
        let t = &run.calibrated;
        let pts = operating_points(name, t, &thresholds, &latency, &penalties)?;
        let (best_t, best_u) = min_uii_threshold(t, &thresholds, &penalties)?;
        let _ = writeln!(
            summary,
            "{name},{best_t},{best_u},{},{}",
            run.report.ece_before, run.report.ece_after
        );
        println!(
            "{name}: ece {:.4} -> {:.4}, min UII {best_u:.4} at threshold {best_t}",
            run.report.ece_before, run.report.ece_after
        );

        let dist = scenario_distribution(t, &thresholds);
        write_file(
            &a.out,
            &format!("scenarios_{name}.csv"),
            &scenario_csv(&dist),
        )?;
        let layers: Vec<Series> = Scenario::ALL
            .iter()
            .map(|s| {
                let pts = dist
                    .iter()
                    .map(|(th, c)| (*th, c.get(*s) as f64 / t.len() as f64))
                    .collect();
                Series::new(format!("{s} {}", s.implication()), pts)
            })
            .collect();
        let chart = Chart::new(
            &format!("Scenario distribution ({name})"),
            "threshold",
            "share of records",
        )
        .x_range(0.0, 1.0)
        .y_range(0.0, 1.0);
        write_file(
            &a.out,
            &format!("scenarios_{name}.svg"),
            &chart.stacked_area(&layers),
        )?;

        let metrics = sweep_metrics(t, &thresholds)?;
        write_file(&a.out, &format!("sweep_{name}.csv"), &metrics.to_csv())?;
        write_file(
            &a.out,
            &format!("reliability_{name}.csv"),
            &bin_stats(t, cfg.bins)?.to_csv(),
        )?;

        uii_series.push(Series::new(
            format!("{name} (min {best_u:.3} at {best_t})"),
            pts.iter()
                .map(|p| (p.threshold.unwrap_or(0.0), p.uii))
                .collect(),
        ));
        points.extend(pts);
        eval_split.get_or_insert(run.uncalibrated);
    }
    let eval = eval_split.expect("at least one method");
    let baselines = vec![
        edge_only_point(&eval, &latency, &penalties)?,
        cloud_only_point(&eval, &latency, &penalties)?,
    ];

    write_file(
        &a.out,
        "operating_points.csv",
        &operating_points_csv(&points),
    )?;
    write_file(&a.out, "baselines.csv", &operating_points_csv(&baselines))?;
    let mut all = baselines;
    all.extend(points);
    write_file(&a.out, "pareto.csv", &pareto_csv(&all))?;
    write_file(&a.out, "min_uii.csv", &summary)?;
    write_file(&a.out, "pareto.svg", &pareto_svg(&all))?;
    let uii_chart =
        Chart::new("User upsetness index vs threshold", "threshold", "UII").x_range(0.0, 1.0);
    write_file(&a.out, "uii.svg", &uii_chart.line(&uii_series))?;
    println!("pareto_points={}", pareto_front(&all).len());
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<OperatingPoint>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("--points: cannot read {}", path.display()))?;
    parse_operating_points(&text).with_context(|| format!("--points {}", path.display()))
}

pub fn pareto(a: &ParetoArgs) -> Result<()> {
    let mut points = Vec::new();
    for p in &a.points {
        points.extend(read_points(p)?);
    }
    out_dir(&a.out)?;
    write_file(&a.out, "pareto.csv", &pareto_csv(&points))?;
    let front = pareto_front(&points);
    write_file(&a.out, "front.csv", &operating_points_csv(&front))?;
    write_file(&a.out, "pareto.svg", &pareto_svg(&points))?;
    println!("points={}", points.len());
    println!("pareto_points={}", front.len());
    Ok(())
}
