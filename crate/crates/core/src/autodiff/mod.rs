//! Small reverse-mode differentiation engine with just the operators the
//! network needs.

mod backward;
mod check;
mod ops;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::AxisTag;
use crate::tsf::BlockSpec;

pub use backward::Gradients;
pub use check::{grad_check, grad_check_at, grad_check_branched, rel_error, GradCheck, Sample};

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::config(format!(
                "tensor shape {shape:?} needs {} values, got {}",
                numel(&shape),
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel(&shape);
        Tensor {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
            requires_grad: false,
        }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Named trainable parameters in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::config(format!("duplicate parameter name `{name}`")));
        }
        if numel(&shape) != data.len() {
            return Err(Error::config(format!("parameter `{name}` has the wrong number of values")));
        }
        self.params.push(Param { name, shape, data });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Zero buffers shaped like every parameter.
    pub fn zeros_like(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.data.len()]).collect()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Param(ParamId),
    Affine {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    LeakyRelu {
        x: Var,
        slope: f64,
    },
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Mul(Var, Var),
    Add(Var, Var),
    Scale {
        x: Var,
        c: f64,
    },
    Sum(Var),
    Mean(Var),
    L2Norm {
        x: Var,
        axis: usize,
    },
    Reshape(Var),
    CumSum {
        x: Var,
        axis: usize,
    },
    Rodrigues(Var),
    Rotate {
        r: Var,
        v: Var,
    },
    Tsf {
        x: Var,
        spec: Arc<BlockSpec>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    BinarizeSt(Var),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Value,
    op: Op,
    requires_grad: bool,
}

/// Whether stochastic layers are active.
#[derive(Debug, Clone)]
pub enum Mode {
    Eval,
    Train { rng: ChaCha8Rng },
}

impl Mode {
    pub fn train(seed: u64) -> Self {
        Mode::Train {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// One forward computation recorded in execution order.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    mode: Mode,
}

static EMPTY_STORE: ParamStore = ParamStore { params: Vec::new() };

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore, mode: Mode) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            mode,
        }
    }

    /// A graph without parameters, evaluated in eval mode.
    pub fn standalone() -> Graph<'static> {
        Graph::new(&EMPTY_STORE, Mode::Eval)
    }

    pub fn is_training(&self) -> bool {
        matches!(self.mode, Mode::Train { .. })
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => &self.store.get(*id).data,
        }
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor {
            shape: self.shape(v).to_vec(),
            data: self.value(v).to_vec(),
            requires_grad: self.requires_grad(v),
        }
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad;
        self.push(t.shape, t.data, Op::Leaf, rg)
    }

    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        Ok(self.input(Tensor::new(shape, data)?))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let shape = self.store.get(id).shape.clone();
        self.nodes.push(Node {
            shape,
            value: Value::Param(id),
            op: Op::Param(id),
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node {
            shape,
            value: Value::Owned(data),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Hash of every discrete decision taken by the recorded forward pass:
    /// activation signs, hard gate thresholds, norm and feature branches.
    /// Equal signatures at two inputs mean the same smooth piece was used.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let mut keys = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            keys.clear();
            match &node.op {
                Op::LeakyRelu { x, .. } => keys.extend(self.value(*x).iter().map(|&v| u64::from(v > 0.0))),
                Op::BinarizeSt(x) => keys.extend(self.value(*x).iter().map(|&v| u64::from(v >= 0.5))),
                Op::L2Norm { .. } => keys.extend(self.value(Var(i)).iter().map(|&v| u64::from(v > 0.0))),
                Op::Tsf { x, spec } => {
                    let t = self.shape(*x)[2];
                    for series in self.value(*x).chunks(t) {
                        for k in 0..node.shape[1] {
                            spec.branch_block(&series[spec.block_range(k)], &mut keys);
                        }
                    }
                }
                _ => continue,
            }
            i.hash(&mut h);
            keys.hash(&mut h);
        }
        h.finish()
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.requires_grad(v))
    }
}

/// Tag columns appended after the features of every axis.
pub(crate) fn tag_columns(tags: &[AxisTag]) -> Vec<[f64; 3]> {
    tags.iter().map(AxisTag::as_features).collect()
}
