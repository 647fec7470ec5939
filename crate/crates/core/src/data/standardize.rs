use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelLayout, Segment};

/// Channels sharing one scale: a sensor triad or a single channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGroup {
    pub channels: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: f64,
}

/// Per-channel centering with one pooled scale per triad, so a rotation of
/// the raw triad stays a rotation after scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub groups: Vec<ChannelGroup>,
}

impl Standardizer {
    /// Statistics from `segments` only (the training split).
    pub fn fit(layout: &ChannelLayout, segments: &[Segment]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::usage("cannot fit standardization on an empty training split"));
        }
        let map = layout.triad_map();
        let mut groups: Vec<Vec<usize>> = map.triads.iter().map(|t| t.to_vec()).collect();
        groups.extend(map.others.iter().map(|&c| vec![c]));
        groups.sort();
        let groups = groups
            .into_iter()
            .map(|channels| {
                let mean: Vec<f64> = channels
                    .iter()
                    .map(|&c| {
                        let (s, n) = segments.iter().fold((0.0, 0usize), |(s, n), g| {
                            (s + g.channel(c).iter().sum::<f64>(), n + g.len())
                        });
                        s / n as f64
                    })
                    .collect();
                let (mut ss, mut n) = (0.0, 0usize);
                for g in segments {
                    for (&c, m) in channels.iter().zip(&mean) {
                        ss += g.channel(c).iter().map(|v| (v - m).powi(2)).sum::<f64>();
                        n += g.len();
                    }
                }
                let std = (ss / n as f64).sqrt();
                ChannelGroup {
                    channels,
                    mean,
                    std: if std > 0.0 { std } else { 1.0 },
                }
            })
            .collect();
        Ok(Standardizer { groups })
    }

    pub fn apply(&self, seg: &mut Segment) {
        for g in &self.groups {
            for (&c, m) in g.channels.iter().zip(&g.mean) {
                for v in seg.channel_mut(c) {
                    *v = (*v - m) / g.std;
                }
            }
        }
    }
}
