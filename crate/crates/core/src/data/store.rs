//! Binary segment stores (one per split) and the split manifest.
//!
//! Store layout, little-endian:
//!
//! ```text
//! magic "RTSFSEGS" | version u32 | header toml (u32 len, bytes) | count u64
//! per segment: label u32, f32 x channels x window (channel-major)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::{Split, SplitSpec};
use super::standardize::Standardizer;
use crate::error::{Error, Result};
use crate::signal::{ChannelInfo, ChannelLayout, Segment};

pub const STORE_MAGIC: &[u8; 8] = b"RTSFSEGS";
pub const STORE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "splits.toml";

pub fn store_file(split: Split) -> String {
    format!("{}.seg", split.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub dataset: String,
    pub window: usize,
    pub stride: usize,
    pub split: Split,
    pub class_names: Vec<String>,
    pub channels: Vec<ChannelInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStore {
    pub header: StoreHeader,
    pub segments: Vec<Segment>,
}

impl SegmentStore {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let text = toml::to_string(&self.header).map_err(|e| Error::config(format!("store header: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.segments.len() as u64).to_le_bytes());
        for s in &self.segments {
            out.extend_from_slice(&(s.label as u32).to_le_bytes());
            for &v in s.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8], origin: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Input(format!("{origin}: {msg}"));
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos + n;
            if end > buf.len() {
                return Err(bad("segment store truncated"));
            }
            let s = &buf[pos..end];
            pos = end;
            Ok(s)
        };
        if take(8)? != STORE_MAGIC {
            return Err(bad("not a segment store (bad magic)"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != STORE_VERSION {
            return Err(bad(&format!("unsupported store version {version}")));
        }
        let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let text = std::str::from_utf8(take(n)?).map_err(|_| bad("header is not utf-8"))?;
        let header: StoreHeader = toml::from_str(text).map_err(|e| bad(&format!("header: {e}")))?;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let (c, t) = (header.channels.len(), header.window);
        let mut segments = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let label = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            if label >= header.class_names.len() {
                return Err(bad(&format!("label {label} outside {} classes", header.class_names.len())));
            }
            let values = take(4 * c * t)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect();
            segments.push(Segment::new(values, c, t, label)?);
        }
        if pos != buf.len() {
            return Err(bad("trailing bytes after segments"));
        }
        Ok(SegmentStore { header, segments })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFiles(vec![path.to_path_buf()]));
        }
        let buf = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&buf, &path.display().to_string())
    }

    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout::new(self.header.channels.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub split: Split,
    /// Subjects or trials assigned to this split.
    pub members: Vec<String>,
    pub segments: usize,
    pub class_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: String,
    pub window: usize,
    pub stride: usize,
    pub rate_hz: f64,
    pub rule: SplitSpec,
    pub class_names: Vec<String>,
    pub splits: Vec<SplitEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardizer>,
}

/// A segmented dataset with all three splits in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub window: usize,
    pub stride: usize,
    pub rate_hz: f64,
    pub layout: ChannelLayout,
    pub class_names: Vec<String>,
    pub rule: SplitSpec,
    /// Indexed by [`Split::index`].
    pub splits: [Vec<Segment>; 3],
    pub members: [Vec<String>; 3],
    pub standardizer: Option<Standardizer>,
}

impl Dataset {
    pub fn split(&self, s: Split) -> &[Segment] {
        &self.splits[s.index()]
    }

    /// Fits on the training split and rescales every split.
    pub fn standardize(&mut self) -> Result<()> {
        let st = Standardizer::fit(&self.layout, self.split(Split::Train))?;
        for split in &mut self.splits {
            for seg in split.iter_mut() {
                st.apply(seg);
            }
        }
        self.standardizer = Some(st);
        Ok(())
    }

    pub fn class_histogram(&self, s: Split) -> Vec<usize> {
        let mut h = vec![0; self.class_names.len()];
        for seg in self.split(s) {
            h[seg.label] += 1;
        }
        h
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            dataset: self.name.clone(),
            window: self.window,
            stride: self.stride,
            rate_hz: self.rate_hz,
            rule: self.rule.clone(),
            class_names: self.class_names.clone(),
            splits: Split::ALL
                .iter()
                .map(|&s| SplitEntry {
                    split: s,
                    members: self.members[s.index()].clone(),
                    segments: self.split(s).len(),
                    class_histogram: self.class_histogram(s),
                })
                .collect(),
            standardization: self.standardizer.clone(),
        }
    }

    pub fn store(&self, s: Split) -> SegmentStore {
        SegmentStore {
            header: StoreHeader {
                dataset: self.name.clone(),
                window: self.window,
                stride: self.stride,
                split: s,
                class_names: self.class_names.clone(),
                channels: self.layout.channels.clone(),
            },
            segments: self.split(s).to_vec(),
        }
    }

    /// Writes the three stores and the manifest into `dir`, replacing old files.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for s in Split::ALL {
            self.store(s).write(&dir.join(store_file(s)))?;
        }
        let text = toml::to_string(&self.manifest()).map_err(|e| Error::config(format!("manifest: {e}")))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let paths: Vec<_> = Split::ALL
            .iter()
            .map(|&s| dir.join(store_file(s)))
            .chain([mpath.clone()])
            .collect();
        let missing: Vec<_> = paths.iter().filter(|p| !p.exists()).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::MissingFiles(missing));
        }
        let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(format!("reading {}", mpath.display()), e))?;
        let manifest: SplitManifest =
            toml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", mpath.display())))?;
        let stores = Split::ALL
            .iter()
            .map(|&s| SegmentStore::read(&dir.join(store_file(s))))
            .collect::<Result<Vec<_>>>()?;
        let layout = stores[0].layout();
        if stores.iter().any(|s| s.header.channels != layout.channels || s.header.window != manifest.window) {
            return Err(Error::Input(format!("segment stores in {} disagree on layout", dir.display())));
        }
        let mut it = stores.into_iter().map(|s| s.segments);
        let splits = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        let mut members: [Vec<String>; 3] = Default::default();
        for e in &manifest.splits {
            members[e.split.index()] = e.members.clone();
        }
        Ok(Dataset {
            name: manifest.dataset,
            window: manifest.window,
            stride: manifest.stride,
            rate_hz: manifest.rate_hz,
            layout,
            class_names: manifest.class_names,
            rule: manifest.rule,
            splits,
            members,
            standardizer: manifest.standardization,
        })
    }
}
