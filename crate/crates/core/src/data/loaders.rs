//! Readers for the four benchmark datasets in their published layouts.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::split::{Split, SplitKey, SplitSpec};
use super::store::Dataset;
use super::stream::{interpolate_nan, segment, LabeledStream};
use crate::error::{Error, Result};
use crate::signal::{ChannelInfo, ChannelLayout, Segment, SensorType};

/// NaN runs up to this long are interpolated.
pub const MAX_GAP_SECONDS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetId {
    Ucihar,
    Pamap2,
    Daphnet,
    Opportunity,
}

pub const SUPPORTED: &str = "ucihar, pamap2, daphnet, opportunity";

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ucihar" => DatasetId::Ucihar,
            "pamap2" => DatasetId::Pamap2,
            "daphnet" => DatasetId::Daphnet,
            "opportunity" => DatasetId::Opportunity,
            _ => return Err(Error::usage(format!("unknown dataset {s:?}; supported: {SUPPORTED}"))),
        })
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetId::Ucihar => "ucihar",
            DatasetId::Pamap2 => "pamap2",
            DatasetId::Daphnet => "daphnet",
            DatasetId::Opportunity => "opportunity",
        })
    }
}

const UCIHAR_CLASSES: [&str; 6] = [
    "walking",
    "walking_upstairs",
    "walking_downstairs",
    "sitting",
    "standing",
    "laying",
];

const PAMAP2_ACTIVITIES: [(u32, &str); 11] = [
    (1, "lying"),
    (2, "sitting"),
    (3, "standing"),
    (4, "walking"),
    (5, "running"),
    (6, "cycling"),
    (7, "nordic_walking"),
    (12, "ascending_stairs"),
    (13, "descending_stairs"),
    (16, "vacuum_cleaning"),
    (17, "ironing"),
];

const OPPORTUNITY_GESTURES: [(u32, &str); 17] = [
    (406516, "open_door_1"),
    (406517, "open_door_2"),
    (404516, "close_door_1"),
    (404517, "close_door_2"),
    (406520, "open_fridge"),
    (404520, "close_fridge"),
    (406505, "open_dishwasher"),
    (404505, "close_dishwasher"),
    (406519, "open_drawer_1"),
    (404519, "close_drawer_1"),
    (406511, "open_drawer_2"),
    (404511, "close_drawer_2"),
    (406508, "open_drawer_3"),
    (404508, "close_drawer_3"),
    (408512, "clean_table"),
    (407521, "drink_from_cup"),
    (405506, "toggle_switch"),
];

/// 0-based first column of each XSens unit (acc, gyro, mag follow).
const OPPORTUNITY_XSENS: [(&str, usize); 5] = [("back", 37), ("rua", 50), ("rla", 63), ("lua", 76), ("lla", 89)];
/// 0-based first column of each shoe unit; body-frame acc at +6, body-frame angular velocity at +9.
const OPPORTUNITY_SHOES: [(&str, usize); 2] = [("l_shoe", 102), ("r_shoe", 118)];
const OPPORTUNITY_LABEL_COLUMN: usize = 249;
const OPPORTUNITY_COLUMNS: usize = 250;

impl DatasetId {
    pub fn rate_hz(self) -> f64 {
        match self {
            DatasetId::Ucihar => 50.0,
            DatasetId::Pamap2 => 100.0,
            DatasetId::Daphnet => 64.0,
            DatasetId::Opportunity => 30.0,
        }
    }

    pub fn window(self) -> usize {
        match self {
            DatasetId::Ucihar => 128,
            DatasetId::Pamap2 => 256,
            DatasetId::Daphnet => 192,
            DatasetId::Opportunity => 32,
        }
    }

    /// Half the window for every dataset.
    pub fn stride(self) -> usize {
        self.window() / 2
    }

    pub fn split_rule(self) -> SplitSpec {
        let r = match self {
            DatasetId::Ucihar => SplitSpec::new(
                SplitKey::Subject,
                &["7", "22"],
                &["2", "4", "9", "10", "12", "13", "18", "20", "24"],
            ),
            DatasetId::Pamap2 => SplitSpec::new(SplitKey::Subject, &["105"], &["106"]),
            DatasetId::Daphnet => SplitSpec::new(
                SplitKey::Trial,
                &["S02R02", "S03R03", "S05R01"],
                &["S02R01", "S04R01", "S05R02"],
            ),
            DatasetId::Opportunity => SplitSpec::new(
                SplitKey::Trial,
                &["S1-ADL1", "S3-ADL3", "S3-Drill", "S4-ADL4"],
                &["S2-ADL2", "S2-Drill", "S3-ADL1", "S4-ADL5"],
            ),
        };
        r.expect("static split rules are disjoint")
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            DatasetId::Ucihar => UCIHAR_CLASSES.iter().map(|s| s.to_string()).collect(),
            DatasetId::Pamap2 => PAMAP2_ACTIVITIES.iter().map(|(_, s)| s.to_string()).collect(),
            DatasetId::Daphnet => vec!["no_freeze".into(), "freeze".into()],
            DatasetId::Opportunity => OPPORTUNITY_GESTURES.iter().map(|(_, s)| s.to_string()).collect(),
        }
    }

    pub fn layout(self) -> ChannelLayout {
        use SensorType::*;
        match self {
            DatasetId::Ucihar => ChannelLayout::from_triads(&[("body_acc", Acc, 1), ("body_gyro", Gyro, 1)]),
            DatasetId::Pamap2 => {
                let mut t = Vec::new();
                for (loc, name) in [(1, "hand"), (2, "chest"), (3, "ankle")] {
                    t.push((format!("{name}_acc"), Acc, loc));
                    t.push((format!("{name}_gyro"), Gyro, loc));
                    t.push((format!("{name}_mag"), Mag, loc));
                }
                triads(&t)
            }
            DatasetId::Daphnet => ChannelLayout::from_triads(&[("ankle_acc", Acc, 1), ("thigh_acc", Acc, 2), ("trunk_acc", Acc, 3)]),
            DatasetId::Opportunity => {
                let mut t = Vec::new();
                for (i, (name, _)) in OPPORTUNITY_XSENS.iter().enumerate() {
                    let loc = i as u32 + 1;
                    t.push((format!("{name}_acc"), Acc, loc));
                    t.push((format!("{name}_gyro"), Gyro, loc));
                    t.push((format!("{name}_mag"), Mag, loc));
                }
                for (i, (name, _)) in OPPORTUNITY_SHOES.iter().enumerate() {
                    let loc = (OPPORTUNITY_XSENS.len() + i) as u32 + 1;
                    t.push((format!("{name}_acc"), Acc, loc));
                    t.push((format!("{name}_gyro"), Gyro, loc));
                }
                triads(&t)
            }
        }
    }

    /// Reads and segments the raw files under `root`. Segments are not standardized.
    pub fn load(self, root: &Path) -> Result<Dataset> {
        if !root.is_dir() {
            return Err(Error::MissingFiles(vec![root.to_path_buf()]));
        }
        match self {
            DatasetId::Ucihar => load_ucihar(root),
            DatasetId::Pamap2 => from_streams(self, load_pamap2(root)?),
            DatasetId::Daphnet => from_streams(self, load_daphnet(root)?),
            DatasetId::Opportunity => from_streams(self, load_opportunity(root)?),
        }
    }
}

fn triads(t: &[(String, SensorType, u32)]) -> ChannelLayout {
    let channels = t
        .iter()
        .flat_map(|(p, s, l)| ["x", "y", "z"].map(|a| ChannelInfo::new(format!("{p}_{a}"), *s, *l)))
        .collect();
    ChannelLayout::new(channels)
}

/// First of `candidates` (relative to `root`) that is a directory, else `root`.
fn resolve(root: &Path, candidates: &[&str]) -> PathBuf {
    candidates
        .iter()
        .map(|c| root.join(c))
        .find(|p| p.is_dir())
        .unwrap_or_else(|| root.to_path_buf())
}

fn require(paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingFiles(missing))
    }
}

/// Whitespace-separated numeric rows with exactly `columns` fields (any count when `None`).
pub fn read_table(path: &Path, columns: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let row = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| malformed(format!("{f:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(n) = columns {
            if row.len() != n {
                return Err(malformed(format!("expected {n} columns, found {}", row.len())));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn label_of(value: f64, ids: &[u32]) -> Option<usize> {
    ids.iter().position(|&id| id as f64 == value)
}

fn from_streams(id: DatasetId, streams: Vec<LabeledStream>) -> Result<Dataset> {
    let rule = id.split_rule();
    let mut splits: [Vec<Segment>; 3] = Default::default();
    let mut members: [BTreeSet<String>; 3] = Default::default();
    for s in &streams {
        let split = rule.assign(&s.subject, &s.trial);
        let clean = interpolate_nan(s, MAX_GAP_SECONDS);
        splits[split.index()].extend(segment(&clean, id.window(), id.stride())?);
        let key = match rule.key {
            SplitKey::Subject => &s.subject,
            SplitKey::Trial => &s.trial,
        };
        members[split.index()].insert(key.clone());
    }
    Ok(Dataset {
        name: id.to_string(),
        window: id.window(),
        stride: id.stride(),
        rate_hz: id.rate_hz(),
        layout: id.layout(),
        class_names: id.class_names(),
        rule,
        splits,
        members: members.map(|m| m.into_iter().collect()),
        standardizer: None,
    })
}

fn load_ucihar(root: &Path) -> Result<Dataset> {
    let id = DatasetId::Ucihar;
    let base = resolve(root, &["UCI HAR Dataset"]);
    let signals = ["body_acc_x", "body_acc_y", "body_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z"];
    let files = |part: &str| -> (Vec<PathBuf>, PathBuf, PathBuf) {
        let dir = base.join(part);
        (
            signals
                .iter()
                .map(|s| dir.join("Inertial Signals").join(format!("{s}_{part}.txt")))
                .collect(),
            dir.join(format!("subject_{part}.txt")),
            dir.join(format!("y_{part}.txt")),
        )
    };
    let mut all = Vec::new();
    for part in ["train", "test"] {
        let (sig, subj, y) = files(part);
        all.extend(sig);
        all.push(subj);
        all.push(y);
    }
    require(&all)?;

    let rule = id.split_rule();
    let mut splits: [Vec<Segment>; 3] = Default::default();
    let mut members: [BTreeSet<String>; 3] = Default::default();
    for part in ["train", "test"] {
        let (sig, subj_path, y_path) = files(part);
        let subjects = read_table(&subj_path, Some(1))?;
        let labels = read_table(&y_path, Some(1))?;
        let chans = sig
            .iter()
            .map(|p| read_table(p, Some(id.window())))
            .collect::<Result<Vec<_>>>()?;
        let n = subjects.len();
        if labels.len() != n || chans.iter().any(|c| c.len() != n) {
            return Err(Error::Input(format!(
                "{part}: subject, label and signal files have different row counts"
            )));
        }
        for r in 0..n {
            let label = labels[r][0];
            if !(1.0..=6.0).contains(&label) || label.fract() != 0.0 {
                return Err(Error::Malformed {
                    path: y_path.clone(),
                    line: r + 1,
                    msg: format!("activity label {label} outside 1-6"),
                });
            }
            let subject = format!("{}", subjects[r][0] as i64);
            // The original test files form the test split; validation subjects come out of train.
            let split = match (part, rule.assign(&subject, "")) {
                ("test", _) => Split::Test,
                (_, Split::Validation) => Split::Validation,
                _ => Split::Train,
            };
            let values: Vec<Vec<f64>> = chans.iter().map(|c| c[r].clone()).collect();
            splits[split.index()].push(Segment::from_channels(&values, label as usize - 1)?);
            members[split.index()].insert(subject);
        }
    }
    Ok(Dataset {
        name: id.to_string(),
        window: id.window(),
        stride: id.stride(),
        rate_hz: id.rate_hz(),
        layout: id.layout(),
        class_names: id.class_names(),
        rule,
        splits,
        members: members.map(|m| m.into_iter().collect()),
        standardizer: None,
    })
}

fn load_pamap2(root: &Path) -> Result<Vec<LabeledStream>> {
    let dir = resolve(root, &["PAMAP2_Dataset/Protocol", "Protocol"]);
    let paths: Vec<PathBuf> = (101..=109).map(|s| dir.join(format!("subject{s}.dat"))).collect();
    require(&paths)?;
    let ids: Vec<u32> = PAMAP2_ACTIVITIES.iter().map(|a| a.0).collect();
    let mut cols = Vec::new();
    for base in [3, 20, 37] {
        cols.extend(base + 1..base + 4); // acc, 16 g range
        cols.extend(base + 7..base + 13); // gyro, mag
    }
    let mut streams = Vec::new();
    for (path, subject) in paths.iter().zip(101..) {
        let rows = read_table(path, Some(54))?;
        let labels = rows.iter().map(|r| label_of(r[1], &ids)).collect();
        let channels = cols.iter().map(|&c| rows.iter().map(|r| r[c]).collect()).collect();
        let s = subject.to_string();
        streams.push(LabeledStream::new(channels, labels, format!("subject{s}"), s, 100.0)?);
    }
    Ok(streams)
}

fn load_daphnet(root: &Path) -> Result<Vec<LabeledStream>> {
    let dir = resolve(root, &["dataset_fog_release/dataset", "dataset"]);
    let rule = DatasetId::Daphnet.split_rule();
    require(
        &rule
            .validation
            .iter()
            .chain(&rule.test)
            .map(|t| dir.join(format!("{t}.txt")))
            .collect::<Vec<_>>(),
    )?;
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| {
            let b = n.as_bytes();
            n.len() == 10 && n.ends_with(".txt") && b[0] == b'S' && b[3] == b'R'
        })
        .collect();
    names.sort();
    let mut streams = Vec::new();
    for name in names {
        let path = dir.join(&name);
        let rows = read_table(&path, Some(11))?;
        let labels = rows
            .iter()
            .map(|r| match r[10] as i64 {
                1 => Some(0),
                2 => Some(1),
                _ => None,
            })
            .collect();
        let channels = (1..10).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
        let trial = name.trim_end_matches(".txt").to_string();
        let subject = trial[..3].to_string();
        streams.push(LabeledStream::new(channels, labels, trial, subject, 64.0)?);
    }
    Ok(streams)
}

fn load_opportunity(root: &Path) -> Result<Vec<LabeledStream>> {
    let dir = resolve(root, &["OpportunityUCIDataset/dataset", "dataset"]);
    let trials: Vec<String> = (1..=4)
        .flat_map(|s| (1..=5).map(move |r| format!("S{s}-ADL{r}")).chain([format!("S{s}-Drill")]))
        .collect();
    let paths: Vec<PathBuf> = trials.iter().map(|t| dir.join(format!("{t}.dat"))).collect();
    require(&paths)?;
    let ids: Vec<u32> = OPPORTUNITY_GESTURES.iter().map(|g| g.0).collect();
    let mut cols = Vec::new();
    for (_, base) in OPPORTUNITY_XSENS {
        cols.extend(base..base + 9);
    }
    for (_, base) in OPPORTUNITY_SHOES {
        cols.extend(base + 6..base + 12);
    }
    let mut streams = Vec::new();
    for (trial, path) in trials.iter().zip(&paths) {
        let rows = read_table(path, Some(OPPORTUNITY_COLUMNS))?;
        let labels = rows.iter().map(|r| label_of(r[OPPORTUNITY_LABEL_COLUMN], &ids)).collect();
        let channels = cols.iter().map(|&c| rows.iter().map(|r| r[c]).collect()).collect();
        let subject = trial.split('-').next().unwrap_or_default().to_string();
        streams.push(LabeledStream::new(channels, labels, trial.clone(), subject, 30.0)?);
    }
    Ok(streams)
}
