//! The hand-enumerated 12-record trace: every decision outcome and every
//! grasp scenario, checked exactly at threshold 0.5.

use std::path::PathBuf;

use hgn_core::controller::{
    confusion_counts, decide, ideal_model, metrics, outcome, DecisionOutcome,
};
use hgn_core::experience::{
    aggregate, scenario, scenario_counts, uii, LatencyConfig, PenaltyTable, Scenario,
};
use hgn_core::Trace;

const THRESHOLD: f64 = 0.5;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn expected() -> Vec<(String, DecisionOutcome, Scenario)> {
    let text = std::fs::read_to_string(fixture("controller_12.expected.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            let o = match cols[1] {
                "TP" => DecisionOutcome::TruePositive,
                "FP" => DecisionOutcome::FalsePositive,
                "FN" => DecisionOutcome::FalseNegative,
                "TN" => DecisionOutcome::TrueNegative,
                other => panic!("bad outcome {other}"),
            };
            let s = Scenario::ALL[cols[2][1..].parse::<usize>().unwrap() - 1];
            (cols[0].to_string(), o, s)
        })
        .collect()
}

fn trace() -> Trace {
    Trace::load(fixture("controller_12.jsonl")).unwrap()
}

#[test]
fn per_record_outcomes_and_scenarios() {
    let t = trace();
    let exp = expected();
    assert_eq!(t.len(), 12);
    for (r, (id, o, s)) in t.records.iter().zip(&exp) {
        assert_eq!(&r.sample_id, id);
        let got = outcome(decide(r.edge_confidence(), THRESHOLD), ideal_model(r));
        assert_eq!(got, *o, "{id}");
        assert_eq!(scenario(r, THRESHOLD), *s, "{id}");
    }
}

#[test]
fn every_cell_is_covered() {
    let exp = expected();
    for o in [
        DecisionOutcome::TruePositive,
        DecisionOutcome::FalsePositive,
        DecisionOutcome::FalseNegative,
        DecisionOutcome::TrueNegative,
    ] {
        assert!(exp.iter().any(|e| e.1 == o), "{o:?}");
    }
    for s in Scenario::ALL {
        assert!(exp.iter().any(|e| e.2 == s), "{s}");
    }
}

#[test]
fn aggregate_values_are_exact() {
    let t = trace();
    let c = confusion_counts(&t, THRESHOLD).unwrap();
    assert_eq!((c.tp, c.fp, c.fn_, c.tn), (5, 1, 4, 2));
    let m = metrics(&c);
    assert_eq!(m.precision, Some(5.0 / 6.0));
    assert_eq!(m.recall, Some(5.0 / 9.0));
    assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(m.specificity, Some(2.0 / 3.0));
    assert_eq!(m.accuracy, Some(7.0 / 12.0));

    assert_eq!(scenario_counts(&t, THRESHOLD).0, [4, 2, 4, 1, 1]);
    let p = PenaltyTable::default();
    assert!((uii(&t, THRESHOLD, &p).unwrap() - 35.0 / 12.0).abs() < 1e-15);

    let op = aggregate("fixture", &t, THRESHOLD, &LatencyConfig::default(), &p).unwrap();
    assert_eq!(op.final_accuracy, 0.5);
    assert_eq!(op.offload_fraction, 6.0 / 12.0);
    // 6 records at 20 ms, 6 at 20 + 50 + 206 ms
    assert_eq!(op.mean_latency_ms, (6.0 * 20.0 + 6.0 * 276.0) / 12.0);
    assert_eq!(op.deadline_hit_rate, 0.5);
}
