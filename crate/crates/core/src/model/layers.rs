use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::GateEval;
use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::error::Result;
use crate::tsf::BlockSpec;

pub(crate) struct Init<'a> {
    pub rng: ChaCha8Rng,
    pub store: &'a mut ParamStore,
}

impl Init<'_> {
    fn glorot(&mut self, name: String, fan_in: usize, fan_out: usize) -> Result<ParamId> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| self.rng.gen_range(-limit..limit)).collect();
        self.store.add(name, vec![fan_in, fan_out], data)
    }

    fn fill(&mut self, name: String, n: usize, v: f64) -> Result<ParamId> {
        self.store.add(name, vec![n], vec![v; n])
    }
}

/// Per-pass settings shared by every layer.
pub(crate) struct Stage {
    pub slope: f64,
    pub dropout: f64,
    pub gates: GateEval,
}

/// Fixed gate values and zeroed axes for the classification path mixers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixerOverrides {
    /// `(axis, value)` pairs replacing computed axis gates.
    pub axis_gates: Vec<(usize, f64)>,
    /// Axes whose axis-wise features are replaced by zeros.
    pub zero_axes: Vec<usize>,
}

impl MixerOverrides {
    fn is_empty(&self) -> bool {
        self.axis_gates.is_empty() && self.zero_axes.is_empty()
    }
}

struct Fc {
    w: ParamId,
    b: ParamId,
}

impl Fc {
    fn build(init: &mut Init, name: &str, input: usize, out: usize) -> Result<Fc> {
        Ok(Fc {
            w: init.glorot(format!("{name}.w"), input, out)?,
            b: init.fill(format!("{name}.b"), out, 0.0)?,
        })
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        g.affine(x, w, Some(b))
    }
}

struct MlpStage {
    fc: Fc,
    gamma: ParamId,
    beta: ParamId,
}

/// `n` stages of affine, layer norm, leaky ReLU and dropout; stage widths
/// halve towards the final width.
pub(crate) struct MlpBlock {
    stages: Vec<MlpStage>,
}

pub(crate) fn stage_widths(base: usize, n: usize) -> Vec<usize> {
    (0..n).map(|j| base << (n - 1 - j)).collect()
}

impl MlpBlock {
    fn build(init: &mut Init, name: &str, input: usize, base: usize, n: usize) -> Result<MlpBlock> {
        let mut stages = Vec::with_capacity(n);
        let mut fan_in = input;
        for (j, width) in stage_widths(base, n).into_iter().enumerate() {
            let prefix = format!("{name}.{j}");
            stages.push(MlpStage {
                fc: Fc::build(init, &prefix, fan_in, width)?,
                gamma: init.fill(format!("{prefix}.ln_scale"), width, 1.0)?,
                beta: init.fill(format!("{prefix}.ln_shift"), width, 0.0)?,
            });
            fan_in = width;
        }
        Ok(MlpBlock { stages })
    }

    fn forward(&self, g: &mut Graph, mut x: Var, st: &Stage) -> Result<Var> {
        for s in &self.stages {
            let y = s.fc.forward(g, x)?;
            let (gamma, beta) = (g.param(s.gamma), g.param(s.beta));
            let y = g.layer_norm(y, gamma, beta)?;
            let y = g.leaky_relu(y, st.slope);
            x = g.dropout(y, st.dropout)?;
        }
        Ok(x)
    }
}

/// Axis-wise MLP with weights shared over axes, then a second MLP over the
/// serialized axis outputs.
pub(crate) struct SubBlock {
    axis: MlpBlock,
    fin: MlpBlock,
}

impl SubBlock {
    fn build(init: &mut Init, name: &str, cfg: &ModelConfig, slots: (usize, usize), axes: usize, width: usize) -> Result<SubBlock> {
        let (abk, ad) = cfg.slot(slots.0);
        let (fbk, fd) = cfg.slot(slots.1);
        Ok(SubBlock {
            axis: MlpBlock::build(init, &format!("{name}.axis"), width, abk, ad)?,
            fin: MlpBlock::build(init, &format!("{name}.final"), axes * abk, fbk, fd)?,
        })
    }

    fn serialize_and_finish(&self, g: &mut Graph, h: Var, st: &Stage) -> Result<Var> {
        let s = g.shape(h).to_vec();
        let flat = g.reshape(h, vec![s[0], s[1] * s[2]])?;
        self.fin.forward(g, flat, st)
    }

    /// `x[N, A, W]` to `[N, final width]`.
    pub fn forward(&self, g: &mut Graph, x: Var, st: &Stage) -> Result<Var> {
        let h = self.axis.forward(g, x, st)?;
        self.serialize_and_finish(g, h, st)
    }
}

/// Sub-block with axis-wise and channel-wise gates computed from the input.
pub(crate) struct Mixer {
    main: SubBlock,
    axis_gate: SubBlock,
    axis_fc: Fc,
    chan_gate: SubBlock,
    chan_fc: Fc,
    axes: usize,
}

impl Mixer {
    fn build(init: &mut Init, name: &str, cfg: &ModelConfig, base: usize, axes: usize, width: usize) -> Result<Mixer> {
        let main = SubBlock::build(init, &format!("{name}.main"), cfg, (base + 1, base + 2), axes, width)?;
        let axis_gate = SubBlock::build(init, &format!("{name}.axis_gate"), cfg, (base + 3, base + 4), axes, width)?;
        let axis_fc = Fc::build(init, &format!("{name}.axis_gate.fc"), cfg.slot(base + 4).0, axes)?;
        let chan_gate = SubBlock::build(init, &format!("{name}.chan_gate"), cfg, (base + 5, base + 6), axes, width)?;
        let chan_fc = Fc::build(init, &format!("{name}.chan_gate.fc"), cfg.slot(base + 6).0, cfg.slot(base + 1).0)?;
        Ok(Mixer {
            main,
            axis_gate,
            axis_fc,
            chan_gate,
            chan_fc,
            axes,
        })
    }

    fn gate(&self, g: &mut Graph, sub: &SubBlock, fc: &Fc, x: Var, st: &Stage) -> Result<Var> {
        let h = sub.forward(g, x, st)?;
        let logit = fc.forward(g, h)?;
        let s = g.sigmoid(logit);
        Ok(match st.gates {
            GateEval::Hard => g.binarize_st(s),
            _ => s,
        })
    }

    fn forward(&self, g: &mut Graph, x: Var, st: &Stage, ov: Option<&MixerOverrides>) -> Result<Var> {
        let n = g.shape(x)[0];
        let mut h = self.main.axis.forward(g, x, st)?;
        let ov = ov.filter(|o| !o.is_empty());
        if let Some(ov) = ov.filter(|o| !o.zero_axes.is_empty()) {
            let mut mask = vec![1.0; self.axes];
            for &a in &ov.zero_axes {
                mask[a] = 0.0;
            }
            let m = g.constant(vec![1, self.axes, 1], mask)?;
            h = g.mul(h, m)?;
        }
        if st.gates != GateEval::Ones {
            let mut ga = self.gate(g, &self.axis_gate, &self.axis_fc, x, st)?;
            if let Some(ov) = ov.filter(|o| !o.axis_gates.is_empty()) {
                let mut keep = vec![1.0; self.axes];
                let mut forced = vec![0.0; self.axes];
                for &(a, v) in &ov.axis_gates {
                    keep[a] = 0.0;
                    forced[a] = v;
                }
                let keep = g.constant(vec![1, self.axes], keep)?;
                let forced = g.constant(vec![1, self.axes], forced)?;
                ga = g.mul(ga, keep)?;
                ga = g.add(ga, forced)?;
            }
            let gc = self.gate(g, &self.chan_gate, &self.chan_fc, x, st)?;
            let width = g.shape(gc)[1];
            let ga = g.reshape(ga, vec![n, self.axes, 1])?;
            let gc = g.reshape(gc, vec![n, 1, width])?;
            h = g.mul(h, ga)?;
            h = g.mul(h, gc)?;
        }
        self.main.serialize_and_finish(g, h, st)
    }

    /// The ungated sub-block that shares this mixer's main weights.
    #[cfg(test)]
    fn sub_forward(&self, g: &mut Graph, x: Var, st: &Stage) -> Result<Var> {
        self.main.forward(g, x, st)
    }
}

/// One block-set mixer per block set, then serialization, an MLP and a dense output.
pub(crate) struct Path {
    pub specs: Vec<Arc<BlockSpec>>,
    pub mixers: Vec<Mixer>,
    mlp: MlpBlock,
    out: Fc,
}

impl Path {
    /// `base` is 0 for the rotation path and 7 for the classification path.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        init: &mut Init,
        name: &str,
        cfg: &ModelConfig,
        base: usize,
        specs: Vec<Arc<BlockSpec>>,
        axes: usize,
        length: usize,
        outputs: usize,
    ) -> Result<Path> {
        let mut mixers = Vec::with_capacity(specs.len());
        let mut serialized = 0;
        for (i, spec) in specs.iter().enumerate() {
            let width = spec.feature_width() + 3;
            mixers.push(Mixer::build(init, &format!("{name}.set{i}"), cfg, base, axes, width)?);
            serialized += spec.block_count(length)? * cfg.slot(base + 2).0;
        }
        let (bk, d) = cfg.slot(base + 7);
        let mlp = MlpBlock::build(init, &format!("{name}.mlp"), serialized, bk, d)?;
        let out = Fc::build(init, &format!("{name}.out"), bk, outputs)?;
        Ok(Path {
            specs,
            mixers,
            mlp,
            out,
        })
    }

    /// `feats[s]` is `[B, blocks, A, W]` for block set `s`; returns `[B, outputs]`.
    pub fn forward(&self, g: &mut Graph, feats: &[Var], st: &Stage, ov: Option<&MixerOverrides>) -> Result<Var> {
        let mut parts = Vec::with_capacity(feats.len());
        for (mixer, &f) in self.mixers.iter().zip(feats) {
            let s = g.shape(f).to_vec();
            let (b, nb, a, w) = (s[0], s[1], s[2], s[3]);
            let x = g.reshape(f, vec![b * nb, a, w])?;
            let y = mixer.forward(g, x, st, ov)?;
            let width = g.shape(y)[1];
            parts.push(g.reshape(y, vec![b, nb * width])?);
        }
        let joined = if parts.len() == 1 { parts[0] } else { g.concat(&parts, 1)? };
        let h = self.mlp.forward(g, joined, st)?;
        self.out.forward(g, h)
    }
}
