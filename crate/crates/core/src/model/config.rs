use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelInfo, ChannelLayout, SensorType};
use crate::tsf::{selected_features, BlockSpec, Feature};

/// Number of MLP-block slots per model; 1-7 belong to the rotation
/// parameter path and 8-14 mirror them on the classification path.
pub const SLOTS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    /// Sigmoid gate values in (0, 1).
    #[default]
    Soft,
    /// Gates thresholded at 0.5 with straight-through gradients.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSetConfig {
    pub block_length: usize,
    #[serde(default)]
    pub overlap: usize,
    /// Feature lines such as `"4 q=0.25 mode=order"`; defaults to the selected set.
    #[serde(default = "default_feature_lines")]
    pub features: Vec<String>,
}

fn default_feature_lines() -> Vec<String> {
    selected_features().iter().map(|f| f.to_string()).collect()
}

impl BlockSetConfig {
    pub fn new(block_length: usize, overlap: usize) -> Self {
        BlockSetConfig {
            block_length,
            overlap,
            features: default_feature_lines(),
        }
    }

    pub fn spec(&self) -> Result<BlockSpec> {
        let mut features = Vec::with_capacity(self.features.len());
        for line in &self.features {
            match Feature::parse_line(line)? {
                Some(f) => features.push(f),
                None => continue,
            }
        }
        BlockSpec::new(self.block_length, self.overlap, features)
    }
}

fn default_slope() -> f64 {
    0.3
}

fn default_dropout() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// The 29 integer hyperparameters plus everything needed to size the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub heads: usize,
    /// Final-stage width of each MLP block slot.
    pub base_kernels: [usize; SLOTS],
    /// Stage count of each MLP block slot.
    pub stages: [usize; SLOTS],
    pub block_sets: Vec<BlockSetConfig>,
    /// Block sets of the rotation path; the main block sets when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_block_sets: Option<Vec<BlockSetConfig>>,
    pub class_count: usize,
    #[serde(default)]
    pub segment_length: usize,
    #[serde(default)]
    pub channels: Vec<ChannelInfo>,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default)]
    pub meta_constraints: bool,
    /// Gate behaviour at inference; training always uses soft gates.
    #[serde(default)]
    pub gate: GateMode,
    /// When false the rotation block is replaced by identity rotations.
    #[serde(default = "default_true")]
    pub rotation: bool,
}

impl ModelConfig {
    /// Table of hyperparameters with the given shape, leaving data binding empty.
    pub fn new(heads: usize, base_kernels: [usize; SLOTS], stages: [usize; SLOTS], block_sets: Vec<BlockSetConfig>, class_count: usize) -> Self {
        ModelConfig {
            heads,
            base_kernels,
            stages,
            block_sets,
            rotation_block_sets: None,
            class_count,
            segment_length: 0,
            channels: Vec::new(),
            leaky_slope: default_slope(),
            dropout: default_dropout(),
            meta_constraints: false,
            gate: GateMode::Soft,
            rotation: true,
        }
    }

    /// Parameters published for the UCI HAR benchmark: 6 channels of 128 samples.
    pub fn ucihar() -> Self {
        let (mut bk, mut d) = ([0; SLOTS], [0; SLOTS]);
        for i in [1, 3, 5, 8, 10, 12] {
            bk[i - 1] = 128;
            d[i - 1] = 2;
        }
        for i in [2, 9] {
            bk[i - 1] = 128;
            d[i - 1] = 3;
        }
        for i in [6, 13] {
            bk[i - 1] = 64;
            d[i - 1] = 1;
        }
        (bk[3], d[3]) = (128, 4);
        (bk[6], d[6]) = (16, 3);
        (bk[10], d[10]) = (16, 4);
        (bk[13], d[13]) = (32, 1);
        let mut cfg = ModelConfig::new(4, bk, d, vec![BlockSetConfig::new(32, 0), BlockSetConfig::new(128, 0)], 6);
        cfg.meta_constraints = true;
        cfg
    }

    /// Small configuration for gradient checks: two heads, every slot 8 wide
    /// with one stage, two triads of 16 samples, block sets of 8 and 16,
    /// three classes and no dropout.
    pub fn tiny() -> Self {
        let sets = vec![BlockSetConfig::new(8, 0), BlockSetConfig::new(16, 0)];
        let mut cfg = ModelConfig::new(2, [8; SLOTS], [1; SLOTS], sets, 3);
        cfg.dropout = 0.0;
        let layout = ChannelLayout::from_triads(&[("acc", SensorType::Acc, 1), ("gyro", SensorType::Gyro, 1)]);
        cfg.with_data(&layout, 16)
    }

    pub fn with_data(mut self, layout: &ChannelLayout, segment_length: usize) -> Self {
        self.channels = layout.channels.clone();
        self.segment_length = segment_length;
        self
    }

    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout::new(self.channels.clone())
    }

    /// 1-based slot access.
    pub fn slot(&self, i: usize) -> (usize, usize) {
        (self.base_kernels[i - 1], self.stages[i - 1])
    }

    pub fn rotation_sets(&self) -> &[BlockSetConfig] {
        self.rotation_block_sets.as_deref().unwrap_or(&self.block_sets)
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::config("n_h (head count) must be positive"));
        }
        for i in 1..=SLOTS {
            let (bk, d) = self.slot(i);
            if bk == 0 {
                return Err(Error::config(format!("n_{i}^bk must be positive")));
            }
            if d == 0 {
                return Err(Error::config(format!("n_{i}^d must be positive")));
            }
        }
        if self.class_count < 2 {
            return Err(Error::config("class_count must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::config("leaky_slope must be finite"));
        }
        if self.meta_constraints {
            self.check_meta()?;
        }
        if self.block_sets.is_empty() || self.rotation_sets().is_empty() {
            return Err(Error::config("at least one block set is required"));
        }
        if self.channels.is_empty() || self.segment_length == 0 {
            return Err(Error::config(
                "model is not bound to a channel layout and segment length",
            ));
        }
        for set in self.block_sets.iter().chain(self.rotation_sets()) {
            set.spec()?.block_count(self.segment_length)?;
        }
        if self.rotation && self.layout().triad_map().triads.is_empty() {
            return Err(Error::config(
                "the rotation block needs at least one 3-axis sensor triad",
            ));
        }
        Ok(())
    }

    fn check_meta(&self) -> Result<()> {
        if self.heads != 4 {
            return Err(Error::config(format!(
                "meta-setting constraint n_h = 4 violated (n_h = {})",
                self.heads
            )));
        }
        let tie = |name: &str, v: &[usize; SLOTS], group: &[usize]| -> Result<()> {
            let first = v[group[0] - 1];
            for &i in &group[1..] {
                if v[i - 1] != first {
                    return Err(Error::config(format!(
                        "meta-setting constraint n_{}^{name} = n_{i}^{name} violated ({first} vs {})",
                        group[0],
                        v[i - 1]
                    )));
                }
            }
            Ok(())
        };
        for v in [("bk", &self.base_kernels), ("d", &self.stages)] {
            tie(v.0, v.1, &[2, 9])?;
            tie(v.0, v.1, &[6, 13])?;
            tie(v.0, v.1, &[1, 3, 5, 8, 10, 12])?;
        }
        Ok(())
    }

    pub(crate) fn specs(sets: &[BlockSetConfig]) -> Result<Vec<Arc<BlockSpec>>> {
        sets.iter().map(|s| s.spec().map(Arc::new)).collect()
    }
}
