//! The network: per-block feature mixers, the multi-head rotation block
//! and the classification path.

mod config;
mod layers;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check_branched, GradCheck, Graph, Mode, ParamStore, Sample, Var};
use crate::error::{Error, Result};
use crate::rotation::TriadMap;
use crate::signal::{axis_code, AxisTag, Segment};
use crate::tsf::BlockSpec;

pub use config::{BlockSetConfig, GateMode, ModelConfig, SLOTS};
pub use layers::MixerOverrides;
use layers::{Init, Path, Stage};

/// Where the per-head rotation parameters come from during a forward pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RotationSource {
    /// Computed by the rotation parameter path.
    #[default]
    Learned,
    /// Raw per-head 4-vectors used in place of the path output (before accumulation).
    Fixed(Vec<[f64; 4]>),
    /// Rotation skipped: every head receives a verbatim copy of the input triads.
    Identity,
}

/// How gates behave in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateEval {
    Soft,
    Hard,
    /// Gating disabled (all gates equal to one).
    Ones,
}

impl From<GateMode> for GateEval {
    fn from(m: GateMode) -> Self {
        match m {
            GateMode::Soft => GateEval::Soft,
            GateMode::Hard => GateEval::Hard,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ForwardOptions {
    /// Dropout seed; `None` runs in evaluation mode.
    pub train_seed: Option<u64>,
    /// Defaults to soft in training and the configured mode in evaluation.
    pub gates: Option<GateEval>,
    pub rotation: RotationSource,
    /// Applied to every mixer of the classification path.
    pub main_overrides: MixerOverrides,
}

/// Segments packed channel-major as `[B, C, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub data: Vec<f64>,
    pub size: usize,
    pub channels: usize,
    pub length: usize,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn from_segments(segments: &[&Segment]) -> Result<Batch> {
        let first = segments.first().ok_or_else(|| Error::usage("empty batch"))?;
        let (channels, length) = (first.channels(), first.len());
        let mut data = Vec::with_capacity(segments.len() * channels * length);
        for s in segments {
            if s.channels() != channels || s.len() != length {
                return Err(Error::config("segments in a batch differ in shape"));
            }
            data.extend_from_slice(s.values());
        }
        Ok(Batch {
            data,
            size: segments.len(),
            channels,
            length,
            labels: segments.iter().map(|s| s.label).collect(),
        })
    }
}

/// Variables of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub logits: Var,
    /// Accumulated per-head parameters `[B, H, 4]` when rotations are computed.
    pub head_params: Option<Var>,
    /// The rotated triad stack `[B, H*P*3, T]`.
    pub rotated: Option<Var>,
}

pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    map: TriadMap,
    rot: Option<Path>,
    main: Path,
    norm_tags: Vec<AxisTag>,
    rotated_tags: Vec<AxisTag>,
    other_tags: Vec<AxisTag>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("params", &self.store.scalar_count())
            .field("heads", &self.config.heads)
            .finish()
    }
}

impl Model {
    /// Builds and initializes a model; identical configs and seeds give identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let layout = config.layout();
        let map = layout.triad_map();
        let tags = layout.tags();
        let norm_tags: Vec<AxisTag> = map
            .triads
            .iter()
            .map(|t| AxisTag {
                axis: axis_code::NORM,
                ..tags[t[0]]
            })
            .collect();
        let one_head: Vec<AxisTag> = map.triads.iter().flatten().map(|&c| tags[c]).collect();
        let rotated_tags = (0..config.heads).flat_map(|_| one_head.iter().copied()).collect();
        let other_tags = map.others.iter().map(|&c| tags[c]).collect();

        let mut store = ParamStore::new();
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store: &mut store,
        };
        let t = config.segment_length;
        let rot = if config.rotation {
            let specs = ModelConfig::specs(config.rotation_sets())?;
            Some(Path::build(&mut init, "rot", &config, 0, specs, map.triads.len(), t, 4 * config.heads)?)
        } else {
            None
        };
        let main_axes = map.triads.len() * (1 + 3 * config.heads) + map.others.len();
        let specs = ModelConfig::specs(&config.block_sets)?;
        let main = Path::build(&mut init, "main", &config, 7, specs, main_axes, t, config.class_count)?;
        Ok(Model {
            config,
            store,
            map,
            rot,
            main,
            norm_tags,
            rotated_tags,
            other_tags,
        })
    }

    /// Rebuilds the structure of `config` and loads parameters by name.
    pub fn with_params(config: ModelConfig, params: &ParamStore) -> Result<Model> {
        let mut model = Model::new(config, 0)?;
        if params.len() != model.store.len() {
            return Err(Error::config(format!(
                "parameter set has {} tensors, the configuration needs {}",
                params.len(),
                model.store.len()
            )));
        }
        for (_, p) in params.iter() {
            let id = model
                .store
                .find(&p.name)
                .ok_or_else(|| Error::config(format!("unexpected parameter `{}`", p.name)))?;
            let dst = model.store.get_mut(id);
            if dst.shape != p.shape {
                return Err(Error::config(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    p.name, p.shape, dst.shape
                )));
            }
            dst.data.copy_from_slice(&p.data);
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn triad_map(&self) -> &TriadMap {
        &self.map
    }

    /// Axes entering the classification path: triad norms, rotated triads, other channels.
    pub fn main_axis_count(&self) -> usize {
        self.norm_tags.len() + self.rotated_tags.len() + self.other_tags.len()
    }

    pub fn main_specs(&self) -> &[Arc<BlockSpec>] {
        &self.main.specs
    }

    pub fn graph(&self, train_seed: Option<u64>) -> Graph<'_> {
        let mode = match train_seed {
            Some(s) => Mode::train(s),
            None => Mode::Eval,
        };
        Graph::new(&self.store, mode)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.channels != self.config.channels.len() || batch.length != self.config.segment_length {
            return Err(Error::config(format!(
                "batch of {} channels x {} samples does not match the model's {} x {}",
                batch.channels,
                batch.length,
                self.config.channels.len(),
                self.config.segment_length
            )));
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, batch: &Batch, opts: &ForwardOptions) -> Result<Forward> {
        self.check_batch(batch)?;
        let (b, t) = (batch.size, batch.length);
        let heads = self.config.heads;
        let p = self.map.triads.len();
        let gates = opts.gates.unwrap_or(if g.is_training() {
            GateEval::Soft
        } else {
            self.config.gate.into()
        });
        let stage = Stage {
            slope: self.config.leaky_slope,
            dropout: self.config.dropout,
            gates,
        };

        let channel = |bi: usize, c: usize| &batch.data[(bi * batch.channels + c) * t..][..t];
        let mut triads = Vec::with_capacity(b * p * 3 * t);
        let mut others = Vec::with_capacity(b * self.map.others.len() * t);
        for bi in 0..b {
            for tri in &self.map.triads {
                for &c in tri {
                    triads.extend_from_slice(channel(bi, c));
                }
            }
            for &c in &self.map.others {
                others.extend_from_slice(channel(bi, c));
            }
        }

        let mut head_params = None;
        let mut rotated = None;
        let mut norms = None;
        if p > 0 {
            let v = g.constant(vec![b, p, 3, t], triads.clone())?;
            let nv = g.l2_norm(v, 2)?;
            norms = Some(nv);
            let source = match (&opts.rotation, &self.rot) {
                (RotationSource::Learned, None) => &RotationSource::Identity,
                (s, _) => s,
            };
            let stack = match source {
                RotationSource::Identity => {
                    let mut copies = Vec::with_capacity(b * heads * p * 3 * t);
                    for chunk in triads.chunks(p * 3 * t) {
                        for _ in 0..heads {
                            copies.extend_from_slice(chunk);
                        }
                    }
                    g.constant(vec![b, heads * p * 3, t], copies)?
                }
                RotationSource::Fixed(raw) => {
                    if raw.len() != heads {
                        return Err(Error::config(format!("{} fixed rotations for {heads} heads", raw.len())));
                    }
                    let data = (0..b).flat_map(|_| raw.iter().flatten().copied()).collect();
                    let raw = g.constant(vec![b, heads, 4], data)?;
                    self.rotate_stack(g, raw, v, &mut head_params)?
                }
                RotationSource::Learned => {
                    let path = self.rot.as_ref().expect("matched above");
                    let feats = path
                        .specs
                        .iter()
                        .map(|s| g.tsf(nv, s.clone(), &self.norm_tags))
                        .collect::<Result<Vec<_>>>()?;
                    let out = path.forward(g, &feats, &stage, None)?;
                    let act = g.tanh(out);
                    let raw = g.reshape(act, vec![b, heads, 4])?;
                    self.rotate_stack(g, raw, v, &mut head_params)?
                }
            };
            rotated = Some(stack);
        }
        let other = if self.map.others.is_empty() {
            None
        } else {
            Some(g.constant(vec![b, self.map.others.len(), t], others)?)
        };

        let groups: Vec<(Var, &[AxisTag])> = [
            (norms, self.norm_tags.as_slice()),
            (rotated, self.rotated_tags.as_slice()),
            (other, self.other_tags.as_slice()),
        ]
        .into_iter()
        .filter_map(|(v, tags)| v.map(|v| (v, tags)))
        .collect();
        let mut feats = Vec::with_capacity(self.main.specs.len());
        for spec in &self.main.specs {
            let parts = groups
                .iter()
                .map(|&(v, tags)| g.tsf(v, spec.clone(), tags))
                .collect::<Result<Vec<_>>>()?;
            feats.push(if parts.len() == 1 { parts[0] } else { g.concat(&parts, 2)? });
        }
        let logits = self.main.forward(g, &feats, &stage, Some(&opts.main_overrides))?;
        Ok(Forward {
            logits,
            head_params,
            rotated,
        })
    }

    fn rotate_stack(&self, g: &mut Graph, raw: Var, v: Var, head_params: &mut Option<Var>) -> Result<Var> {
        let shape = g.shape(v).to_vec();
        let (b, p, t) = (shape[0], shape[1], shape[3]);
        let acc = g.cumsum(raw, 1)?;
        *head_params = Some(acc);
        let r = g.rodrigues(acc)?;
        let rotated = g.rotate(r, v)?;
        g.reshape(rotated, vec![b, self.config.heads * p * 3, t])
    }

    /// Class probabilities `[B, K]`, row-major, in evaluation mode.
    pub fn predict_proba(&self, batch: &Batch) -> Result<Vec<f64>> {
        let mut g = self.graph(None);
        let f = self.forward(&mut g, batch, &ForwardOptions::default())?;
        let probs = g.softmax(f.logits)?;
        Ok(g.value(probs).to_vec())
    }

    pub fn predict(&self, batch: &Batch) -> Result<Vec<usize>> {
        let k = self.config.class_count;
        Ok(self.predict_proba(batch)?.chunks(k).map(argmax).collect())
    }

    /// Mean cross-entropy of a batch in evaluation mode.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let mut g = self.graph(None);
        let f = self.forward(&mut g, batch, &ForwardOptions::default())?;
        let l = g.cross_entropy(f.logits, &batch.labels)?;
        Ok(g.value(l)[0])
    }

    /// Mean cross-entropy and argmax predictions in one evaluation pass.
    pub fn loss_and_predictions(&self, batch: &Batch) -> Result<(f64, Vec<usize>)> {
        let mut g = self.graph(None);
        let f = self.forward(&mut g, batch, &ForwardOptions::default())?;
        let l = g.cross_entropy(f.logits, &batch.labels)?;
        let preds = g.value(f.logits).chunks(self.config.class_count).map(argmax).collect();
        Ok((g.value(l)[0], preds))
    }

    /// Mean cross-entropy and its gradient for every parameter.
    pub fn loss_and_grads(&self, batch: &Batch, opts: &ForwardOptions) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut g = self.graph(opts.train_seed);
        let f = self.forward(&mut g, batch, opts)?;
        let l = g.cross_entropy(f.logits, &batch.labels)?;
        let grads = g.backward(l)?;
        Ok((g.value(l)[0], grads.param_grads(&g)))
    }

    /// Compares the loss gradient with central differences (evaluation mode,
    /// so dropout is off). `coords` limits the perturbed parameters.
    pub fn gradient_check(&self, batch: &Batch, eps: f64, coords: Option<&[usize]>) -> Result<GradCheck> {
        let point = self.flat_params();
        let mut store = self.store.clone();
        let f = |p: &[f64], want_grad: bool| -> Result<Sample> {
            let mut off = 0;
            for param in store.iter_mut() {
                let n = param.data.len();
                param.data.copy_from_slice(&p[off..off + n]);
                off += n;
            }
            let mut g = Graph::new(&store, Mode::Eval);
            let fw = self.forward(&mut g, batch, &ForwardOptions::default())?;
            let l = g.cross_entropy(fw.logits, &batch.labels)?;
            let grad = if want_grad { g.backward(l)?.param_grads(&g).concat() } else { Vec::new() };
            Ok(Sample {
                value: g.value(l)[0],
                grad,
                branch: g.branch_signature(),
            })
        };
        let all: Vec<usize>;
        let coords = match coords {
            Some(c) => c,
            None => {
                all = (0..point.len()).collect();
                &all
            }
        };
        grad_check_branched(f, &point, eps, coords)
    }

    /// All parameters concatenated in creation order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.store.iter().flat_map(|(_, p)| p.data.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.store.scalar_count() {
            return Err(Error::usage("flat parameter vector has the wrong length"));
        }
        let mut off = 0;
        for p in self.store.iter_mut() {
            let n = p.data.len();
            p.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

/// Noisy phase-shifted sinusoids shaped for `cfg`, labels cycling through the
/// classes. Used to probe models without a dataset.
pub fn probe_segments(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<Segment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, t) = (cfg.channels.len(), cfg.segment_length);
    (0..n)
        .map(|i| {
            let phase: f64 = rng.gen_range(0.0..6.0);
            let values = (0..c * t)
                .map(|k| ((k % t) as f64 * 0.7 + phase + (k / t) as f64).sin() + rng.gen_range(-0.3..0.3))
                .collect();
            Segment::new(values, c, t, i % cfg.class_count).expect("probe segment shape")
        })
        .collect()
}

/// Index of the first maximum.
fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}
