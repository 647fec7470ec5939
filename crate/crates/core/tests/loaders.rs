//! Miniature copies of each benchmark's published file layout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rtsfnet::data::{Dataset, DatasetId, Split};
use rtsfnet::Error;

fn write_rows(path: &Path, rows: impl IntoIterator<Item = Vec<String>>) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    let mut s = String::new();
    for r in rows {
        writeln!(s, "{}", r.join(" ")).unwrap();
    }
    fs::write(path, s).unwrap();
}

#[test]
fn ucihar_keeps_the_original_test_split_and_moves_validation_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("UCI HAR Dataset");
    let parts = [("train", vec![1, 7, 1, 7]), ("test", vec![2, 2])];
    for (part, subjects) in &parts {
        let d = base.join(part);
        write_rows(&d.join(format!("subject_{part}.txt")), subjects.iter().map(|s| vec![s.to_string()]));
        write_rows(
            &d.join(format!("y_{part}.txt")),
            (0..subjects.len()).map(|i| vec![(i % 6 + 1).to_string()]),
        );
        for (c, sig) in ["body_acc_x", "body_acc_y", "body_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z"]
            .iter()
            .enumerate()
        {
            let rows = (0..subjects.len()).map(|r| (0..128).map(|t| format!("{:e}", c as f64 + r as f64 * 10.0 + t as f64 * 1e-3)).collect());
            write_rows(&d.join("Inertial Signals").join(format!("{sig}_{part}.txt")), rows);
        }
    }
    let ds = DatasetId::Ucihar.load(dir.path()).unwrap();
    assert_eq!(ds.split(Split::Train).len(), 2);
    assert_eq!(ds.split(Split::Validation).len(), 2);
    assert_eq!(ds.split(Split::Test).len(), 2);
    assert_eq!(ds.members, [vec!["1".to_string()], vec!["7".to_string()], vec!["2".to_string()]]);
    let first = &ds.split(Split::Train)[0];
    assert_eq!(first.label, 0);
    assert_eq!(first.len(), 128);
    assert_eq!(first.channel(4)[3], 4.003);
    assert_eq!(ds.split(Split::Validation)[0].label, 1);
}

#[test]
fn ucihar_missing_files_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    match DatasetId::Ucihar.load(dir.path()) {
        Err(Error::MissingFiles(p)) => assert_eq!(p.len(), 16),
        other => panic!("{other:?}"),
    }
}

#[test]
fn pamap2_reads_protocol_files_by_subject() {
    let dir = tempfile::tempdir().unwrap();
    let proto = dir.path().join("PAMAP2_Dataset/Protocol");
    for s in 101..=109 {
        // 20 transient rows, 300 walking rows with a short NaN gap, 100 ironing rows
        let rows = (0..420).map(|t| {
            let activity = match t {
                0..=19 => 0,
                20..=319 => 4,
                _ => 17,
            };
            (0..54)
                .map(|c| match c {
                    0 => format!("{}", t as f64 / 100.0),
                    1 => activity.to_string(),
                    4 if (100..105).contains(&t) => "NaN".into(),
                    _ => format!("{}", c as f64 + t as f64 * 1e-4),
                })
                .collect()
        });
        write_rows(&proto.join(format!("subject{s}.dat")), rows);
    }
    let ds = DatasetId::Pamap2.load(dir.path()).unwrap();
    // 300-sample walking run, window 256 stride 128: one segment per subject
    assert_eq!(ds.split(Split::Train).len(), 7);
    assert_eq!(ds.members[Split::Validation.index()], vec!["105".to_string()]);
    assert_eq!(ds.members[Split::Test.index()], vec!["106".to_string()]);
    assert_eq!(ds.layout.len(), 27);
    let seg = &ds.split(Split::Test)[0];
    assert_eq!(seg.label, 3);
    assert!(seg.values().iter().all(|v| v.is_finite()));
    // hand acc x comes from column 4; gyro x from column 10
    assert!((seg.channel(0)[0] - (4.0 + 20.0 * 1e-4)).abs() < 1e-12);
    assert!((seg.channel(3)[0] - (10.0 + 20.0 * 1e-4)).abs() < 1e-12);
}

#[test]
fn daphnet_maps_annotations_and_splits_by_trial() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("dataset_fog_release/dataset");
    for trial in ["S01R01", "S02R01", "S02R02", "S03R03", "S04R01", "S05R01", "S05R02"] {
        let rows = (0..600).map(|t| {
            let ann = match t {
                0..=49 => 0,
                50..=249 => 1,
                _ => 2,
            };
            let mut r = vec![(t * 15).to_string()];
            r.extend((1..10).map(|c| (c * 100 + t % 7).to_string()));
            r.push(ann.to_string());
            r
        });
        write_rows(&d.join(format!("{trial}.txt")), rows);
    }
    let ds = DatasetId::Daphnet.load(dir.path()).unwrap();
    // runs of 200 (no freeze) and 350 (freeze) samples give one and two windows of 192/96
    assert_eq!(ds.split(Split::Train).len(), 3);
    assert_eq!(ds.class_histogram(Split::Train), vec![1, 2]);
    assert_eq!(ds.members[Split::Train.index()], vec!["S01R01".to_string()]);
    assert_eq!(ds.split(Split::Validation).len(), 9);
    assert_eq!(ds.split(Split::Test).len(), 9);
}

#[test]
fn opportunity_selects_body_worn_inertial_channels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("OpportunityUCIDataset/dataset");
    for s in 1..=4 {
        for run in (1..=5).map(|r| format!("ADL{r}")).chain(["Drill".to_string()]) {
            let rows = (0..60).map(|t| {
                (0..250)
                    .map(|c| match c {
                        0 => (t * 33).to_string(),
                        249 => (if t < 40 { 406516 } else { 0 }).to_string(),
                        _ => format!("{}", c * 1000 + t),
                    })
                    .collect()
            });
            write_rows(&d.join(format!("S{s}-{run}.dat")), rows);
        }
    }
    let ds = DatasetId::Opportunity.load(dir.path()).unwrap();
    assert_eq!(ds.layout.len(), 57);
    assert_eq!(ds.split(Split::Validation).len(), 4);
    assert_eq!(ds.split(Split::Test).len(), 4);
    assert_eq!(ds.split(Split::Train).len(), 16);
    let seg = &ds.split(Split::Train)[0];
    assert_eq!(seg.len(), 32);
    assert_eq!(seg.channel(0)[0], 37000.0);
    assert_eq!(seg.channel(44)[0], 97000.0);
    assert_eq!(seg.channel(45)[0], 108000.0);
    assert_eq!(seg.channel(48)[0], 111000.0);
    assert_eq!(seg.channel(56)[0], 129000.0);
}

#[test]
fn prepared_dataset_round_trips_through_stores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("dataset");
    for trial in ["S01R01", "S02R01", "S02R02", "S03R03", "S04R01", "S05R01", "S05R02"] {
        let rows = (0..300).map(|t| {
            let mut r = vec![t.to_string()];
            r.extend((1..10).map(|c| format!("{}", (c * t) as f64 * 0.01)));
            r.push("1".into());
            r
        });
        write_rows(&d.join(format!("{trial}.txt")), rows);
    }
    let mut ds = DatasetId::Daphnet.load(dir.path()).unwrap();
    ds.standardize().unwrap();
    let out = dir.path().join("prepared");
    ds.write(&out).unwrap();
    let back = Dataset::read(&out).unwrap();
    assert_eq!(back.layout, ds.layout);
    assert_eq!(back.members, ds.members);
    for s in Split::ALL {
        assert_eq!(back.split(s).len(), ds.split(s).len());
        for (a, b) in back.split(s).iter().zip(ds.split(s)) {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= 1e-6 * y.abs().max(1.0)));
        }
    }
}

#[test]
fn unknown_dataset_lists_supported_ids() {
    let e = "bogus".parse::<DatasetId>().unwrap_err();
    assert!(matches!(e, Error::Usage(_)));
    let msg = e.to_string();
    for id in ["ucihar", "pamap2", "daphnet", "opportunity"] {
        assert!(msg.contains(id), "{msg}");
    }
}
