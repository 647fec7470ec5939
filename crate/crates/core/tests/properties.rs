use proptest::prelude::*;

use rtsfnet::data::{segment, segment_count, LabeledStream, Standardizer};
use rtsfnet::metrics::EvalReport;
use rtsfnet::rotation::{rodrigues_matrix, RotationParams};
use rtsfnet::signal::{ChannelLayout, Segment, SensorType};
use rtsfnet::trainer::{ScheduleState, TrainSchedule};
use rtsfnet::tsf::{full_catalog, Feature, Spectrum};

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 8..80)
}

proptest! {
    #[test]
    fn rotations_are_proper_and_preserve_length(
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in -1.0..1.0f64,
        v in prop::array::uniform3(-50.0..50.0f64),
    ) {
        let r = rodrigues_matrix(&RotationParams::new(axis, angle));
        prop_assert!(r.orthogonality_error() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        let w = r.apply(v);
        let n = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        prop_assert!((n(w) - n(v)).abs() <= 1e-9 * n(v).max(1.0));
    }

    #[test]
    fn every_feature_is_finite_with_the_stated_width(x in series()) {
        for f in full_catalog() {
            let mut out = Vec::new();
            f.eval(&x, &mut out);
            prop_assert_eq!(out.len(), f.width(x.len()));
            prop_assert!(out.iter().all(|v| v.is_finite()), "{} gave {:?}", f, out);
        }
    }

    #[test]
    fn order_statistics_are_ordered(x in series()) {
        let one = |line: &str| {
            let mut out = Vec::new();
            line.parse::<Feature>().unwrap().eval(&x, &mut out);
            out
        };
        let (min, max, mean) = (one("2")[0], one("3")[0], one("1")[0]);
        let q = one("4");
        prop_assert!(min <= q[0] && q[0] <= q[1] && q[1] <= q[2] && q[2] <= max);
        prop_assert!(min <= mean + 1e-9 && mean <= max + 1e-9);
        prop_assert!(one("15")[0] >= max.abs().max(min.abs()) - 1e-12);
        let n = x.len() as f64;
        for id in 17..=23 {
            let c = one(&id.to_string())[0];
            prop_assert!((0.0..=n).contains(&c));
        }
        for id in 24..=33 {
            let c = one(&id.to_string())[0];
            prop_assert!((0.0..n).contains(&c));
        }
    }

    #[test]
    fn spectrum_ratio_sums_to_one(x in series()) {
        let r = Spectrum::of(&x).ratio();
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(r.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn variance_ignores_offsets(x in series(), c in -1e3..1e3f64) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let var = |s: &[f64]| {
            let mut out = Vec::new();
            "7".parse::<Feature>().unwrap().eval(s, &mut out);
            out[0]
        };
        prop_assert!((var(&x) - var(&shifted)).abs() <= 1e-6 * var(&x).max(1.0));
    }

    #[test]
    fn segments_never_cross_runs(
        runs in prop::collection::vec((0usize..4, 1usize..120), 1..12),
        window in 4usize..40,
        stride_frac in 1usize..4,
    ) {
        let stride = (window / stride_frac).max(1);
        let mut labels = Vec::new();
        for &(l, n) in &runs {
            labels.extend(std::iter::repeat(if l == 3 { None } else { Some(l) }).take(n));
        }
        let pos: Vec<f64> = (0..labels.len()).map(|t| t as f64).collect();
        let stream = LabeledStream::new(vec![pos], labels.clone(), "t", "s", 50.0).unwrap();
        let segs = segment(&stream, window, stride).unwrap();
        // maximal single-label runs, NULL excluded
        let mut expected = 0;
        let mut t = 0;
        while t < labels.len() {
            let mut e = t;
            while e < labels.len() && labels[e] == labels[t] {
                e += 1;
            }
            if labels[t].is_some() {
                expected += segment_count(e - t, window, stride);
            }
            t = e;
        }
        prop_assert_eq!(segs.len(), expected);
        for s in &segs {
            let start = s.channel(0)[0] as usize;
            prop_assert!(labels[start..start + window].iter().all(|l| *l == Some(s.label)));
        }
    }

    #[test]
    fn standardized_training_channels_are_centred(
        seed_vals in prop::collection::vec(-10.0..10.0f64, 6 * 16 * 3),
        scale in 0.1..100.0f64,
    ) {
        let layout = ChannelLayout::from_triads(&[("acc", SensorType::Acc, 1), ("gyro", SensorType::Gyro, 1)]);
        let mut segs: Vec<Segment> = seed_vals
            .chunks(6 * 16)
            .map(|c| Segment::new(c.iter().map(|v| v * scale + 3.0).collect(), 6, 16, 0).unwrap())
            .collect();
        let st = Standardizer::fit(&layout, &segs).unwrap();
        for s in &mut segs {
            st.apply(s);
        }
        for c in 0..6 {
            let m: f64 = segs.iter().flat_map(|s| s.channel(c)).sum::<f64>() / (16.0 * segs.len() as f64);
            prop_assert!(m.abs() < 1e-9);
        }
        for triad in [0..3, 3..6] {
            let vals: Vec<f64> = segs.iter().flat_map(|s| triad.clone().flat_map(move |c| s.channel(c).to_vec())).collect();
            let var = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn metric_ranges(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let (actual, predicted): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let r = EvalReport::from_predictions(4, &actual, &predicted).unwrap();
        let hits = actual.iter().zip(&predicted).filter(|(a, p)| a == p).count();
        prop_assert!((r.accuracy - hits as f64 / actual.len() as f64).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.macro_f1));
        prop_assert!((0.0..=1.0).contains(&r.weighted_f1));
        let perfect = EvalReport::from_predictions(4, &actual, &actual).unwrap();
        prop_assert_eq!(perfect.accuracy, 1.0);
    }

    #[test]
    fn schedule_invariants(
        train in prop::collection::vec(0.0..2.0f64, 1..350),
        val in prop::collection::vec(0.0..2.0f64, 350),
    ) {
        let s = TrainSchedule::default();
        let mut st = ScheduleState::new(&s);
        let mut lr = st.lr();
        for (e, (t, v)) in train.iter().zip(&val).enumerate() {
            let d = st.observe(*t, *v);
            prop_assert!(d.next_lr == lr || d.next_lr == lr * 0.8);
            prop_assert_eq!(d.reduced, d.next_lr != lr);
            lr = d.next_lr;
            if d.stop {
                prop_assert!(e + 1 > s.bootstrap_epochs);
                break;
            }
        }
    }
}
