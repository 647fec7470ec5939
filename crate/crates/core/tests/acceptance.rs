//! Acceptance criteria, one line each. Runs as a plain binary so the verdict
//! lines are always printed: `cargo test -p rtsfnet --test acceptance`.
//!
//! Positional arguments filter criteria by name. `--stretch` adds the full
//! UCI HAR training run (hours; needs RTSFNET_DATA_ROOT).

mod common;

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::mount::mount_dataset;
use common::oracle;
use rtsfnet::data::{interpolate_nan, segment, segment_count, DatasetId, LabeledStream, Split, MAX_GAP_SECONDS};
use rtsfnet::metrics::{ConfusionMatrix, EvalReport};
use rtsfnet::model::{probe_segments, Batch, BlockSetConfig, Model, ModelConfig, SLOTS};
use rtsfnet::rotation::{rodrigues_matrix, RotationMatrix, RotationParams};
use rtsfnet::trainer::{evaluate, select_final, train, RunConfig, ScheduleState, TrainSchedule};
use rtsfnet::tsf::{full_catalog, Feature};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_series(rng: &mut ChaCha8Rng, i: usize) -> Vec<f64> {
    let n = rng.gen_range(8..=128);
    match i % 20 {
        0 => vec![if i.is_multiple_of(40) { 0.0 } else { rng.gen_range(-5.0..5.0) }; n],
        1 | 2 => (0..n).map(|_| (rng.gen_range(-3.0..3.0f64) * 2.0).round() / 2.0).collect(),
        3 => (0..n).map(|_| 1e3 + rng.gen_range(-1.0..1.0)).collect(),
        _ => {
            let f = rng.gen_range(0.0..0.5);
            let ph = rng.gen_range(0.0..6.3);
            (0..n)
                .map(|t| (f * t as f64 * std::f64::consts::TAU + ph).sin() * rng.gen_range(0.5..2.0) + rng.gen_range(-1.0..1.0))
                .collect()
        }
    }
}

fn feature_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let catalog = full_catalog();
    let (mut compared, mut skipped_phases) = (0usize, 0usize);
    let (mut worst, mut worst_fft) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for i in 0..1000 {
        let x = random_series(&mut rng, i);
        let amp_sum: f64 = oracle::feature(34, false, &x).iter().sum();
        let amps = oracle::feature(34, false, &x);
        for f in &catalog {
            let id = f.id();
            let time = matches!(f, Feature::Quartiles { time: true });
            let mut got = Vec::new();
            f.eval(&x, &mut got);
            let want = oracle::feature(id, time, &x);
            if got.len() != want.len() {
                failures.push(format!("row {f}: {} columns, expected {}", got.len(), want.len()));
                continue;
            }
            let tol = if oracle::is_spectral(id) { 1e-6 } else { 1e-9 };
            for (k, (&g, &w)) in got.iter().zip(&want).enumerate() {
                let ok = if id == 44 {
                    if amps[k] <= 1e-9 * amp_sum.max(1.0) {
                        skipped_phases += 1;
                        continue;
                    }
                    oracle::close_angle(g, w, tol)
                } else {
                    oracle::close(g, w, tol)
                };
                let err = (g - w).abs() / 1f64.max(g.abs()).max(w.abs());
                if oracle::is_spectral(id) {
                    worst_fft = worst_fft.max(if id == 44 { 0.0 } else { err });
                } else {
                    worst = worst.max(err);
                }
                compared += 1;
                if !ok && failures.len() < 5 {
                    failures.push(format!("series {i} (len {}), row {f} column {k}: {g} vs {w}", x.len()));
                }
            }
        }
    }
    let detail = format!(
        "1000 series x {} rows, {compared} values, max err {worst:.1e} (spectral {worst_fft:.1e}), {skipped_phases} zero-amplitude phases skipped",
        catalog.len()
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn rotation_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut orth, mut det, mut norm) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let p = RotationParams::new(
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            rng.gen_range(-1.0..1.0),
        );
        let r = rodrigues_matrix(&p);
        orth = orth.max(r.orthogonality_error());
        det = det.max((r.determinant() - 1.0).abs());
        let v = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let w = r.apply(v);
        let n0 = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let n1 = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        norm = norm.max((n1 - n0).abs() / n0);
    }
    let mut identity = true;
    for _ in 0..1000 {
        let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        identity &= rodrigues_matrix(&RotationParams::new(axis, 0.0)) == RotationMatrix::IDENTITY;
    }
    check(
        orth < 1e-6 && det < 1e-6 && norm < 1e-9 && identity,
        format!("10000 draws: |R^T R - I| {orth:.1e}, |det - 1| {det:.1e}, norm drift {norm:.1e}, zero angle exact identity {identity}"),
    )
}

fn gradient_check() -> Verdict {
    let model = Model::new(ModelConfig::tiny(), 13).map_err(|e| e.to_string())?;
    let segs = probe_segments(model.config(), 4, 14);
    let batch = Batch::from_segments(&segs.iter().collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let r = model.gradient_check(&batch, 1e-4, None).map_err(|e| e.to_string())?;
    check(
        r.max_rel_error < 1e-3,
        format!(
            "tiny model, {} parameters: max rel err {:.2e} (kinked coordinates excluded: {}, their max {:.1e})",
            r.checked.len(),
            r.max_rel_error,
            r.kinked.len(),
            r.kinked_max_rel_error
        ),
    )
}

fn metrics() -> Verdict {
    let uci = ConfusionMatrix::from_rows(&[
        vec![495, 1, 0, 0, 0, 0],
        vec![4, 466, 1, 0, 0, 0],
        vec![2, 6, 412, 0, 0, 0],
        vec![0, 0, 0, 462, 29, 0],
        vec![0, 0, 0, 23, 509, 0],
        vec![0, 0, 0, 0, 0, 537],
    ])
    .map_err(|e| e.to_string())?;
    let daphnet = ConfusionMatrix::from_rows(&[vec![2095, 8], vec![89, 37]]).map_err(|e| e.to_string())?;
    let u = EvalReport::from_matrix(uci).map_err(|e| e.to_string())?;
    let d = EvalReport::from_matrix(daphnet).map_err(|e| e.to_string())?;
    let ok = (100.0 * u.accuracy - 97.76).abs() <= 0.005
        && (u.macro_f1 - 0.9779).abs() <= 0.0005
        && (u.weighted_f1 - 0.9776).abs() <= 0.0005
        && (100.0 * d.accuracy - 95.65).abs() <= 0.005
        && (d.macro_f1 - 0.7051).abs() <= 0.0005;
    check(
        ok,
        format!(
            "UCI HAR acc {:.4} mf1 {:.4} wf1 {:.4}; Daphnet acc {:.4} mf1 {:.4}",
            100.0 * u.accuracy,
            u.macro_f1,
            u.weighted_f1,
            100.0 * d.accuracy,
            d.macro_f1
        ),
    )
}

/// Channel 0 holds `trial * 100000 + t`, so a segment's samples reveal where it came from.
fn pipeline() -> Verdict {
    const W: usize = 32;
    const S: usize = 16;
    let make = |trial: usize, labels: Vec<Option<usize>>, gaps: &[(usize, usize)]| {
        let n = labels.len();
        let mut pos: Vec<f64> = (0..n).map(|t| (trial * 100_000 + t) as f64).collect();
        let mut other: Vec<f64> = (0..n).map(|t| (t as f64 * 0.3).sin()).collect();
        for &(a, b) in gaps {
            pos[a..b].fill(f64::NAN);
            other[a..b].fill(f64::NAN);
        }
        LabeledStream::new(vec![pos, other], labels, format!("T{trial}"), "1", 50.0).unwrap()
    };
    let run = |l: Option<usize>, n: usize| vec![l; n];
    // trial 1: 300 x class 0 with a 3-sample gap, 50 NULL, 200 x class 1 with a 20-sample gap
    let a = make(1, [run(Some(0), 300), run(None, 50), run(Some(1), 200)].concat(), &[(100, 103), (400, 420)]);
    // trial 2: 150 x class 1 directly followed by 257 x class 2
    let b = make(2, [run(Some(1), 150), run(Some(2), 257)].concat(), &[]);
    let clean_runs: Vec<(usize, usize, usize, usize)> = vec![(1, 0, 300, 0), (1, 350, 400, 1), (1, 420, 550, 1), (2, 0, 150, 1), (2, 150, 407, 2)];
    let expected: usize = clean_runs.iter().map(|r| (r.2 - r.1).checked_sub(W).map_or(0, |d| d / S + 1)).sum();
    let naive_matches = clean_runs.iter().all(|r| segment_count(r.2 - r.1, W, S) == (r.2 - r.1).checked_sub(W).map_or(0, |d| d / S + 1));
    let mut segs = Vec::new();
    for s in [&a, &b] {
        segs.extend(segment(&interpolate_nan(s, MAX_GAP_SECONDS), W, S).map_err(|e| e.to_string())?);
    }
    let mut problems = Vec::new();
    let (mut covers_short_gap, mut covers_long_gap) = (false, false);
    for (i, s) in segs.iter().enumerate() {
        let x = s.channel(0);
        if x.iter().chain(s.channel(1)).any(|v| v.is_nan()) {
            problems.push(format!("segment {i} has NaN"));
            continue;
        }
        let trial = (x[0] / 100_000.0).floor() as usize;
        let start = x[0] as usize - trial * 100_000;
        if x.iter().enumerate().any(|(k, v)| (v - (trial * 100_000 + start + k) as f64).abs() > 1e-9) {
            problems.push(format!("segment {i} is not contiguous"));
        }
        let inside = clean_runs.iter().any(|r| r.0 == trial && r.1 <= start && start + W <= r.2 && r.3 == s.label);
        if !inside {
            problems.push(format!("segment {i} (trial {trial}, start {start}) crosses a run boundary"));
        }
        covers_short_gap |= trial == 1 && start < 103 && start + W > 100;
        covers_long_gap |= trial == 1 && start < 420 && start + W > 400;
    }
    check(
        problems.is_empty() && segs.len() == expected && naive_matches && covers_short_gap && !covers_long_gap,
        format!(
            "{} segments (expected {expected}), 3-sample gap bridged {covers_short_gap}, 20-sample gap excluded {}{}",
            segs.len(),
            !covers_long_gap,
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn schedule() -> Verdict {
    let s = TrainSchedule::default();
    let mut notes = Vec::new();

    // flat training loss: one reduction per 10 plateau epochs, each exactly x0.8
    let mut st = ScheduleState::new(&s);
    let mut lrs = vec![st.lr()];
    for _ in 0..41 {
        lrs.push(st.observe(1.0, 1.0).next_lr);
    }
    let drops: Vec<usize> = (1..lrs.len()).filter(|&i| lrs[i] != lrs[i - 1]).collect();
    let exact = drops.iter().all(|&i| lrs[i] == lrs[i - 1] * 0.8) && lrs.windows(2).all(|w| w[1] <= w[0]);
    let plateau_ok = drops == vec![11, 21, 31, 41] && exact && (lrs[11] - 0.0008).abs() < 1e-18;
    notes.push(format!("lr drops after epochs {drops:?}"));

    // improving train loss, validation flat from epoch 5
    let mut st = ScheduleState::new(&s);
    let mut stop5 = None;
    for e in 1..=350usize {
        let val = if e < 5 { 1.0 / e as f64 } else { 0.25 };
        if st.observe(1.0 / e as f64, val).stop {
            stop5 = Some(e);
            break;
        }
    }
    // validation flat from the start
    let mut st = ScheduleState::new(&s);
    let mut stop_flat = None;
    for e in 1..=350usize {
        if st.observe(1.0 / e as f64, 0.5).stop {
            stop_flat = Some(e);
            break;
        }
    }
    // validation improving until epoch 170
    let mut st = ScheduleState::new(&s);
    let mut stop_late = None;
    for e in 1..=350usize {
        if st.observe(1.0 / e as f64, 1.0 / e.min(170) as f64).stop {
            stop_late = Some(e);
            break;
        }
    }
    // everything improving: runs to the epoch limit
    let mut st = ScheduleState::new(&s);
    let mut last = 0;
    for e in 1..=400usize {
        last = e;
        if st.observe(1.0 / e as f64, 1.0 / e as f64).stop {
            break;
        }
    }
    notes.push(format!("stops: flat from 5 -> {stop5:?}, flat -> {stop_flat:?}, best at 170 -> {stop_late:?}, improving -> {last}"));
    check(
        plateau_ok && stop5 == Some(200) && stop_flat == Some(200) && stop_late == Some(220) && last == 350,
        notes.join("; "),
    )
}

fn mount_config(layout: &rtsfnet::signal::ChannelLayout, rotation: bool) -> ModelConfig {
    let sets = vec![BlockSetConfig::new(16, 0), BlockSetConfig::new(64, 0)];
    let mut cfg = ModelConfig::new(4, [16; SLOTS], [1; SLOTS], sets, 3).with_data(layout, 64);
    cfg.dropout = 0.2;
    cfg.rotation = rotation;
    cfg
}

fn end_to_end() -> Verdict {
    let schedule = TrainSchedule {
        max_epochs: 100,
        batch_size: 32,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for seed in [1u64, 2, 3] {
        let d = mount_dataset(seed, 100, 64);
        for rotation in [true, false] {
            let model = Model::new(mount_config(&d.layout, rotation), seed).map_err(|e| e.to_string())?;
            let out = train(model, &d.layout, &d.train, &d.val, &schedule, seed, |_| {}).map_err(|e| e.to_string())?;
            let (chosen, _) = select_final(out.best, out.last, &d.layout, &d.val, 1).map_err(|e| e.to_string())?;
            let (_, rep) = evaluate(&chosen, &d.layout, &d.test, 1).map_err(|e| e.to_string())?;
            if rotation { &mut with } else { &mut without }.push(100.0 * rep.accuracy);
        }
        rows.push(format!("seed {seed}: {:.1} vs {:.1}", with.last().unwrap(), without.last().unwrap()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    check(
        with.iter().all(|&a| a >= 90.0) && mean(&without) < mean(&with),
        format!(
            "test acc with rotation vs identity rotation: {} (means {:.2} vs {:.2})",
            rows.join(", "),
            mean(&with),
            mean(&without)
        ),
    )
}

fn uci_stretch() -> Verdict {
    let root = std::env::var_os("RTSFNET_DATA_ROOT").ok_or("RTSFNET_DATA_ROOT is not set")?;
    let mut ds = DatasetId::Ucihar.load(&PathBuf::from(root)).map_err(|e| e.to_string())?;
    ds.standardize().map_err(|e| e.to_string())?;
    let cfg_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/ucihar.toml");
    let rc = RunConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let model = Model::new(rc.model.with_data(&ds.layout, ds.window), rc.seed).map_err(|e| e.to_string())?;
    let mut sched = rc.train.clone();
    sched.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (train_set, val, test) = (ds.split(Split::Train), ds.split(Split::Validation), ds.split(Split::Test));
    let out = train(model, &ds.layout, train_set, val, &sched, rc.seed, |r| {
        eprintln!("epoch {} train {:.4} val {:.4} acc {:.2}", r.epoch, r.train_loss, r.val_loss, 100.0 * r.val_accuracy)
    })
    .map_err(|e| e.to_string())?;
    let (chosen, _) = select_final(out.best, out.last, &ds.layout, val, sched.workers).map_err(|e| e.to_string())?;
    let (_, rep) = evaluate(&chosen, &ds.layout, test, sched.workers).map_err(|e| e.to_string())?;
    check(
        100.0 * rep.accuracy >= 95.0,
        format!("test acc {:.2} mf1 {:.4} wf1 {:.4}", 100.0 * rep.accuracy, rep.macro_f1, rep.weighted_f1),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let stretch = args.iter().any(|a| a == "--stretch");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("feature-oracle", feature_oracle),
        ("rotation-suite", rotation_suite),
        ("gradient-check", gradient_check),
        ("metric-reproduction", metrics),
        ("pipeline-properties", pipeline),
        ("schedule-properties", schedule),
        ("end-to-end-rotated-mounts", end_to_end),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let verdict = f();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {d}");
            }
        }
    }
    if stretch {
        let t = Instant::now();
        match uci_stretch() {
            Ok(d) => println!("PASS uci-har-stretch ({:.0}s): {d}", t.elapsed().as_secs_f64()),
            Err(d) => println!("FAIL uci-har-stretch ({:.0}s, non-blocking): {d}", t.elapsed().as_secs_f64()),
        }
    } else {
        println!("SKIP uci-har-stretch: non-blocking; run with `-- --stretch` and RTSFNET_DATA_ROOT");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
