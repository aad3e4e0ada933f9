use hgn_core::controller::{confusion_counts, metrics, ThresholdGrid};
use hgn_core::experience::{
    aggregate, enacted_accuracy, min_uii_threshold, pareto_front, scenario_counts, uii,
    LatencyConfig, OperatingPoint, PenaltyTable, ScenarioFlags,
};
use hgn_core::reliability::{bin_stats, DEFAULT_BINS};
use hgn_core::synth::{generate, BetaShape, SynthParams};
use hgn_core::Trace;
use proptest::prelude::*;

fn arb_trace() -> impl Strategy<Value = Trace> {
    (
        1usize..300,
        prop_oneof![Just(2usize), Just(4), Just(13)],
        0.0f64..=1.0,
        0.0f64..=1.0,
        1.0f64..3.0,
        (0.5f64..8.0, 0.5f64..8.0),
        any::<u64>(),
    )
        .prop_map(|(n, c, edge_acc, cloud_acc, sharpen, (a, b), seed)| {
            generate(&SynthParams {
                n,
                num_classes: c,
                edge_acc,
                cloud_acc,
                sharpen,
                conf_correct: BetaShape::new(a, b),
                conf_incorrect: BetaShape::new(b, a),
                seed,
                ..SynthParams::default()
            })
            .unwrap()
        })
}

fn grid() -> Vec<f64> {
    ThresholdGrid::linspace(0.0, 1.0, 0.05)
        .unwrap()
        .values()
        .to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn controller_monotonicity(t in arb_trace()) {
        let mut prev: Option<(Option<f64>, Option<f64>, f64)> = None;
        for &th in &grid() {
            let c = confusion_counts(&t, th).unwrap();
            prop_assert_eq!(c.total(), t.len());
            let m = metrics(&c);
            let off = aggregate("p", &t, th, &LatencyConfig::default(), &PenaltyTable::default()).unwrap().offload_fraction;
            if let Some((r0, s0, o0)) = prev {
                if let (Some(a), Some(b)) = (r0, m.recall) { prop_assert!(b <= a); }
                if let (Some(a), Some(b)) = (s0, m.specificity) { prop_assert!(b >= a); }
                prop_assert!(off >= o0);
            }
            prev = Some((m.recall, m.specificity, off));
        }
    }

    #[test]
    fn scenarios_partition_and_accuracy_identity(t in arb_trace(), th in 0.0f64..=1.0) {
        for r in &t.records {
            let f = ScenarioFlags::of(r, th);
            prop_assert!(f.feasible());
            prop_assert_eq!(f.matching().len(), 1);
        }
        prop_assert_eq!(scenario_counts(&t, th).total(), t.len());
        let op = aggregate("p", &t, th, &LatencyConfig::default(), &PenaltyTable::default()).unwrap();
        prop_assert_eq!(op.final_accuracy, enacted_accuracy(&t, th).unwrap());
    }

    #[test]
    fn uii_scales_with_penalties(t in arb_trace(), k in 0.1f64..10.0) {
        let p = PenaltyTable::default();
        let q = p.scaled(k).unwrap();
        for &th in &[0.0, 0.3, 0.7, 1.0] {
            let a = uii(&t, th, &p).unwrap();
            let b = uii(&t, th, &q).unwrap();
            prop_assert!((b - k * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        let g = grid();
        // compare on a relative scale so rounding cannot flip a near-tie
        let (ta, ua) = min_uii_threshold(&t, &g, &p).unwrap();
        let (tb, _) = min_uii_threshold(&t, &g, &q).unwrap();
        let ub = uii(&t, tb, &p).unwrap();
        prop_assert!(ta == tb || (ua - ub).abs() <= 1e-9);
    }

    #[test]
    fn latency_is_monotone_with_constant_latencies(t in arb_trace()) {
        let cfg = LatencyConfig::default();
        let p = PenaltyTable::default();
        let pts: Vec<OperatingPoint> = grid().iter().map(|&th| aggregate("p", &t, th, &cfg, &p).unwrap()).collect();
        prop_assert_eq!(pts[0].deadline_hit_rate, 1.0);
        prop_assert_eq!(pts[0].offload_fraction, 0.0);
        for w in pts.windows(2) {
            prop_assert!(w[1].mean_latency_ms >= w[0].mean_latency_ms - 1e-9);
        }
    }

    #[test]
    fn pareto_front_is_exactly_the_non_dominated_set(
        pts in prop::collection::vec((0u8..10, 0u8..10), 1..40)
    ) {
        let points: Vec<OperatingPoint> = pts.iter().map(|&(a, l)| OperatingPoint {
            method: "p".into(),
            threshold: None,
            final_accuracy: a as f64 / 10.0,
            mean_latency_ms: l as f64 * 10.0,
            uii: 0.0,
            deadline_hit_rate: 0.0,
            offload_fraction: 0.0,
        }).collect();
        let dominated = |p: &OperatingPoint| points.iter().any(|q| {
            q.final_accuracy >= p.final_accuracy && q.mean_latency_ms <= p.mean_latency_ms
                && (q.final_accuracy > p.final_accuracy || q.mean_latency_ms < p.mean_latency_ms)
        });
        let front = pareto_front(&points);
        prop_assert_eq!(front.len(), points.iter().filter(|p| !dominated(p)).count());
        prop_assert!(front.iter().all(|p| !dominated(p)));
        prop_assert!(front.windows(2).all(|w| w[0].mean_latency_ms <= w[1].mean_latency_ms));
    }

    #[test]
    fn ece_matches_record_level_sum(t in arb_trace()) {
        let report = bin_stats(&t, DEFAULT_BINS).unwrap();
        // sum over records of (correct - conf) grouped per bin, then |.|/n
        let mut sums = [0.0f64; DEFAULT_BINS];
        for r in &t.records {
            let conf = r.edge_confidence();
            let k = ((conf * DEFAULT_BINS as f64).ceil() as usize).clamp(1, DEFAULT_BINS) - 1;
            sums[k] += f64::from(u8::from(r.edge_correct())) - conf;
        }
        let brute: f64 = sums.iter().map(|s| s.abs()).sum::<f64>() / t.len() as f64;
        prop_assert!((report.ece - brute).abs() < 1e-9);
    }

    #[test]
    fn trace_round_trips(t in arb_trace()) {
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = Trace::read(buf.as_slice()).unwrap();
        prop_assert_eq!(back.records, t.records);
        prop_assert_eq!(back.num_classes, t.num_classes);
    }
}
