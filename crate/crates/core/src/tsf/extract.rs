use crate::error::{Error, Result};
use crate::signal::{AxisTag, Segment};

use super::catalog::Feature;

/// How a segment is cut into blocks and which features each block yields.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub block_length: usize,
    pub overlap: usize,
    pub features: Vec<Feature>,
}

impl BlockSpec {
    pub fn new(block_length: usize, overlap: usize, features: Vec<Feature>) -> Result<Self> {
        let spec = BlockSpec {
            block_length,
            overlap,
            features,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_length == 0 {
            return Err(Error::config("block length must be positive"));
        }
        if self.overlap >= self.block_length {
            return Err(Error::config(format!(
                "block overlap {} must be smaller than the block length {}",
                self.overlap, self.block_length
            )));
        }
        if self.features.is_empty() {
            return Err(Error::config("a block set needs at least one feature"));
        }
        for f in &self.features {
            f.check_len(self.block_length)?;
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.block_length - self.overlap
    }

    /// `floor((len - block) / stride) + 1`; trailing partial blocks are dropped.
    pub fn block_count(&self, len: usize) -> Result<usize> {
        self.validate()?;
        if len < self.block_length {
            return Err(Error::config(format!(
                "segment of {len} samples is shorter than the block length {}",
                self.block_length
            )));
        }
        Ok((len - self.block_length) / self.stride() + 1)
    }

    /// Feature columns per block, excluding tags.
    pub fn feature_width(&self) -> usize {
        self.features.iter().map(|f| f.width(self.block_length)).sum()
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        let start = b * self.stride();
        start..start + self.block_length
    }

    /// Features of one block, in `features` order.
    pub fn eval_block(&self, x: &[f64], out: &mut Vec<f64>) {
        for f in &self.features {
            f.eval(x, out);
        }
    }

    /// Branch keys of every feature on one block.
    pub fn branch_block(&self, x: &[f64], out: &mut Vec<u64>) {
        for f in &self.features {
            f.branch_key(x, out);
        }
    }

    /// Adjoint of [`BlockSpec::eval_block`].
    pub fn vjp_block(&self, x: &[f64], upstream: &[f64], grad: &mut [f64]) {
        let mut offset = 0;
        for f in &self.features {
            let w = f.width(x.len());
            let u = &upstream[offset..offset + w];
            if u.iter().any(|&v| v != 0.0) {
                f.vjp(x, u, grad);
            }
            offset += w;
        }
    }
}

/// Per-axis, per-block features with three tag columns appended per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub axes: usize,
    pub blocks: usize,
    /// Feature columns per block including the three tag columns.
    pub width: usize,
    /// Row-major `axes x blocks x width`.
    pub data: Vec<f64>,
    pub axis_tags: Vec<AxisTag>,
}

impl FeatureTensor {
    pub fn get(&self, axis: usize, block: usize) -> &[f64] {
        let start = (axis * self.blocks + block) * self.width;
        &self.data[start..start + self.width]
    }
}

pub fn extract_block_features(segment: &Segment, tags: &[AxisTag], spec: &BlockSpec) -> Result<FeatureTensor> {
    if tags.len() != segment.channels() {
        return Err(Error::config(format!(
            "{} axis tags for {} channels",
            tags.len(),
            segment.channels()
        )));
    }
    let blocks = spec.block_count(segment.len())?;
    let width = spec.feature_width() + 3;
    let mut data = Vec::with_capacity(segment.channels() * blocks * width);
    for (axis, tag) in tags.iter().enumerate() {
        let x = segment.channel(axis);
        for b in 0..blocks {
            spec.eval_block(&x[spec.block_range(b)], &mut data);
            data.extend(tag.as_features());
        }
    }
    Ok(FeatureTensor {
        axes: segment.channels(),
        blocks,
        width,
        data,
        axis_tags: tags.to_vec(),
    })
}
