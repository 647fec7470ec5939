//! Segments and the channel layout that describes them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::TriadMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorType {
    Acc,
    Gyro,
    Mag,
    Other,
}

impl SensorType {
    pub fn code(self) -> u32 {
        match self {
            SensorType::Acc => 1,
            SensorType::Gyro => 2,
            SensorType::Mag => 3,
            SensorType::Other => 4,
        }
    }

    pub fn from_code(code: u32) -> Option<SensorType> {
        Some(match code {
            1 => SensorType::Acc,
            2 => SensorType::Gyro,
            3 => SensorType::Mag,
            4 => SensorType::Other,
            _ => return None,
        })
    }

    /// Three-axis vector sensors that can be rotated as a rigid triad.
    pub fn rotatable(self) -> bool {
        self != SensorType::Other
    }
}

/// Axis-type codes used in per-axis tags.
pub mod axis_code {
    pub const X: u32 = 1;
    pub const Y: u32 = 2;
    pub const Z: u32 = 3;
    pub const NORM: u32 = 4;
    pub const SCALAR: u32 = 5;
}

/// `(location, sensor type, axis type)` integers appended to every axis's features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisTag {
    pub location: u32,
    pub sensor: u32,
    pub axis: u32,
}

impl AxisTag {
    pub fn as_features(&self) -> [f64; 3] {
        [self.location as f64, self.sensor as f64, self.axis as f64]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub sensor: SensorType,
    pub location: u32,
}

impl ChannelInfo {
    pub fn new(name: impl Into<String>, sensor: SensorType, location: u32) -> Self {
        ChannelInfo {
            name: name.into(),
            sensor,
            location,
        }
    }
}

/// Ordered channel manifest. Three consecutive channels that share a
/// rotatable sensor type and a location form one `(x, y, z)` triad.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub channels: Vec<ChannelInfo>,
}

impl ChannelLayout {
    pub fn new(channels: Vec<ChannelInfo>) -> Self {
        ChannelLayout { channels }
    }

    /// Builds `count` triads named `<prefix>_{x,y,z}` for each `(prefix, sensor, location)`.
    pub fn from_triads(triads: &[(&str, SensorType, u32)]) -> Self {
        let channels = triads
            .iter()
            .flat_map(|&(prefix, sensor, location)| {
                ["x", "y", "z"]
                    .into_iter()
                    .map(move |a| ChannelInfo::new(format!("{prefix}_{a}"), sensor, location))
            })
            .collect();
        ChannelLayout { channels }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn triad_map(&self) -> TriadMap {
        let ch = &self.channels;
        let mut triads = Vec::new();
        let mut others = Vec::new();
        let mut i = 0;
        while i < ch.len() {
            let forms_triad = i + 2 < ch.len()
                && ch[i].sensor.rotatable()
                && (1..3).all(|k| ch[i + k].sensor == ch[i].sensor && ch[i + k].location == ch[i].location);
            if forms_triad {
                triads.push([i, i + 1, i + 2]);
                i += 3;
            } else {
                others.push(i);
                i += 1;
            }
        }
        TriadMap::new(triads, others, ch.len()).expect("derived map is consistent")
    }

    /// Tag of a raw channel: its position inside a triad, or `SCALAR`.
    pub fn tag(&self, channel: usize) -> AxisTag {
        let info = &self.channels[channel];
        let map = self.triad_map();
        let axis = map
            .triads
            .iter()
            .find_map(|t| t.iter().position(|&c| c == channel))
            .map(|p| axis_code::X + p as u32)
            .unwrap_or(axis_code::SCALAR);
        AxisTag {
            location: info.location,
            sensor: info.sensor.code(),
            axis,
        }
    }

    pub fn tags(&self) -> Vec<AxisTag> {
        (0..self.len()).map(|c| self.tag(c)).collect()
    }
}

/// A fixed-length window of `channels` series, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    values: Vec<f64>,
    channels: usize,
    length: usize,
    pub label: usize,
}

impl Segment {
    pub fn new(values: Vec<f64>, channels: usize, length: usize, label: usize) -> Result<Self> {
        if values.len() != channels * length {
            return Err(Error::config(format!(
                "segment has {} values, expected {channels} channels x {length} samples",
                values.len()
            )));
        }
        Ok(Segment {
            values,
            channels,
            length,
            label,
        })
    }

    pub fn from_channels(channels: &[Vec<f64>], label: usize) -> Result<Self> {
        let length = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != length) {
            return Err(Error::config("segment channels differ in length"));
        }
        let values = channels.iter().flatten().copied().collect();
        Segment::new(values, channels.len(), length, label)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.length..(c + 1) * self.length]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.length..(c + 1) * self.length]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
