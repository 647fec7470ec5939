use super::ops::{gemm, rodrigues_vjp, Broadcast};
use super::{numel, Graph, Op, ParamId, Var};
use crate::error::{Error, Result};

/// Gradients of a scalar with respect to every node that requires one.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_node: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient of a node; zeros when the loss does not depend on it.
    pub fn get(&self, g: &Graph, v: Var) -> Vec<f64> {
        self.by_node[v.0]
            .clone()
            .unwrap_or_else(|| vec![0.0; numel(g.shape(v))])
    }

    /// Adds parameter gradients into `acc`, indexed like the parameter store.
    pub fn accumulate_params(&self, acc: &mut [Vec<f64>]) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.by_node[node] {
                for (a, b) in acc[id.0].iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    pub fn param_grads(&self, g: &Graph) -> Vec<Vec<f64>> {
        let mut acc = g.store().zeros_like();
        self.accumulate_params(&mut acc);
        acc
    }
}

fn slot<'a>(grads: &'a mut [Option<Vec<f64>>], g: &Graph, v: Var) -> &'a mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; numel(g.shape(v))])
}

impl<'p> Graph<'p> {
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if numel(self.shape(loss)) != 1 {
            return Err(Error::usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(dy) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &dy, &mut grads);
            grads[i] = Some(dy);
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, i)),
                _ => None,
            })
            .collect();
        Ok(Gradients {
            by_node: grads,
            params,
        })
    }

    fn propagate(&self, i: usize, dy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = self.value(Var(i));
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Affine { x, w, b } => {
                let inner = self.shape(*w)[0];
                let out = self.shape(*w)[1];
                let m = dy.len() / out.max(1);
                if self.requires_grad(*x) {
                    let wv = self.value(*w);
                    let gx = slot(grads, self, *x);
                    gemm(m, out, inner, dy, (out, 1), wv, (1, out), gx);
                }
                if self.requires_grad(*w) {
                    let xv = self.value(*x);
                    let gw = slot(grads, self, *w);
                    gemm(inner, m, out, xv, (1, inner), dy, (out, 1), gw);
                }
                if let Some(b) = b {
                    if self.requires_grad(*b) {
                        let gb = slot(grads, self, *b);
                        for row in dy.chunks(out) {
                            for (g, d) in gb.iter_mut().zip(row) {
                                *g += d;
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let d = self.shape(*gamma)[0];
                if self.requires_grad(*gamma) {
                    let gg = slot(grads, self, *gamma);
                    for (row, h) in dy.chunks(d).zip(xhat.chunks(d)) {
                        for k in 0..d {
                            gg[k] += row[k] * h[k];
                        }
                    }
                }
                if self.requires_grad(*beta) {
                    let gb = slot(grads, self, *beta);
                    for row in dy.chunks(d) {
                        for k in 0..d {
                            gb[k] += row[k];
                        }
                    }
                }
                if self.requires_grad(*x) {
                    let gv = self.value(*gamma);
                    let gx = slot(grads, self, *x);
                    let mut dh = vec![0.0; d];
                    for (r, (row, h)) in dy.chunks(d).zip(xhat.chunks(d)).enumerate() {
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for k in 0..d {
                            dh[k] = row[k] * gv[k];
                            m1 += dh[k];
                            m2 += dh[k] * h[k];
                        }
                        m1 /= d as f64;
                        m2 /= d as f64;
                        for k in 0..d {
                            gx[r * d + k] += rstd[r] * (dh[k] - m1 - h[k] * m2);
                        }
                    }
                }
            }
            Op::LeakyRelu { x, slope } => {
                let xv = self.value(*x);
                let gx = slot(grads, self, *x);
                for k in 0..dy.len() {
                    gx[k] += if xv[k] > 0.0 { dy[k] } else { slope * dy[k] };
                }
            }
            Op::Tanh(x) => {
                let gx = slot(grads, self, *x);
                for k in 0..dy.len() {
                    gx[k] += dy[k] * (1.0 - y[k] * y[k]);
                }
            }
            Op::Sigmoid(x) => {
                let gx = slot(grads, self, *x);
                for k in 0..dy.len() {
                    gx[k] += dy[k] * y[k] * (1.0 - y[k]);
                }
            }
            Op::Softmax(x) => {
                let d = *node.shape.last().unwrap();
                let gx = slot(grads, self, *x);
                for (r, (dr, yr)) in dy.chunks(d).zip(y.chunks(d)).enumerate() {
                    let dot: f64 = dr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for k in 0..d {
                        gx[r * d + k] += yr[k] * (dr[k] - dot);
                    }
                }
            }
            Op::Dropout { x, mask } => {
                let gx = slot(grads, self, *x);
                for k in 0..dy.len() {
                    gx[k] += dy[k] * mask[k];
                }
            }
            Op::Concat { parts, axis } => {
                let shape = &node.shape;
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let mut offset = 0;
                for &p in parts {
                    let chunk = self.shape(p)[*axis] * inner;
                    if self.requires_grad(p) {
                        let gp = slot(grads, self, p);
                        for o in 0..outer {
                            let src = &dy[o * shape[*axis] * inner + offset..][..chunk];
                            for (g, d) in gp[o * chunk..(o + 1) * chunk].iter_mut().zip(src) {
                                *g += d;
                            }
                        }
                    }
                    offset += chunk;
                }
            }
            Op::Mul(a, b) => {
                let bc = Broadcast::new(self.shape(*a), self.shape(*b)).expect("checked in forward");
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    let ga = slot(grads, self, *a);
                    bc.for_each(|o, i, j| ga[i] += dy[o] * bv[j]);
                }
                if self.requires_grad(*b) {
                    let gb = slot(grads, self, *b);
                    bc.for_each(|o, i, j| gb[j] += dy[o] * av[i]);
                }
            }
            Op::Add(a, b) => {
                let bc = Broadcast::new(self.shape(*a), self.shape(*b)).expect("checked in forward");
                if self.requires_grad(*a) {
                    let ga = slot(grads, self, *a);
                    bc.for_each(|o, i, _| ga[i] += dy[o]);
                }
                if self.requires_grad(*b) {
                    let gb = slot(grads, self, *b);
                    bc.for_each(|o, _, j| gb[j] += dy[o]);
                }
            }
            Op::Scale { x, c } => {
                let gx = slot(grads, self, *x);
                for k in 0..dy.len() {
                    gx[k] += c * dy[k];
                }
            }
            Op::Sum(x) => {
                for g in slot(grads, self, *x).iter_mut() {
                    *g += dy[0];
                }
            }
            Op::Mean(x) => {
                let gx = slot(grads, self, *x);
                let n = gx.len() as f64;
                for g in gx.iter_mut() {
                    *g += dy[0] / n;
                }
            }
            Op::L2Norm { x, axis } => {
                let shape = self.shape(*x).to_vec();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let n = shape[*axis];
                let xv = self.value(*x);
                let gx = slot(grads, self, *x);
                for o in 0..outer {
                    for i in 0..inner {
                        let norm = y[o * inner + i];
                        if norm == 0.0 {
                            continue;
                        }
                        let s = dy[o * inner + i] / norm;
                        for k in 0..n {
                            let at = (o * n + k) * inner + i;
                            gx[at] += s * xv[at];
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                for (g, d) in slot(grads, self, *x).iter_mut().zip(dy) {
                    *g += d;
                }
            }
            Op::CumSum { x, axis } => {
                let shape = &node.shape;
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let n = shape[*axis];
                let gx = slot(grads, self, *x);
                for o in 0..outer {
                    for i in 0..inner {
                        let mut acc = 0.0;
                        for k in (0..n).rev() {
                            let at = (o * n + k) * inner + i;
                            acc += dy[at];
                            gx[at] += acc;
                        }
                    }
                }
            }
            Op::Rodrigues(p) => {
                let pv = self.value(*p);
                let gp = slot(grads, self, *p);
                for (q, (pc, uc)) in pv.chunks(4).zip(dy.chunks(9)).enumerate() {
                    rodrigues_vjp(pc, uc, &mut gp[q * 4..q * 4 + 4]);
                }
            }
            Op::Rotate { r, v } => {
                let (b, h, p, t) = (node.shape[0], node.shape[1], node.shape[2], node.shape[4]);
                let (rv, vv) = (self.value(*r), self.value(*v));
                if self.requires_grad(*r) {
                    let gr = slot(grads, self, *r);
                    for bi in 0..b {
                        for hi in 0..h {
                            let m = (bi * h + hi) * 9;
                            for pi in 0..p {
                                let src = &vv[(bi * p + pi) * 3 * t..][..3 * t];
                                let d = &dy[((bi * h + hi) * p + pi) * 3 * t..][..3 * t];
                                for i in 0..3 {
                                    for j in 0..3 {
                                        let s: f64 = (0..t).map(|ti| d[i * t + ti] * src[j * t + ti]).sum();
                                        gr[m + i * 3 + j] += s;
                                    }
                                }
                            }
                        }
                    }
                }
                if self.requires_grad(*v) {
                    let gv = slot(grads, self, *v);
                    for bi in 0..b {
                        for hi in 0..h {
                            let m = &rv[(bi * h + hi) * 9..][..9];
                            for pi in 0..p {
                                let d = &dy[((bi * h + hi) * p + pi) * 3 * t..][..3 * t];
                                let dst = &mut gv[(bi * p + pi) * 3 * t..][..3 * t];
                                for i in 0..3 {
                                    for j in 0..3 {
                                        let c = m[i * 3 + j];
                                        for ti in 0..t {
                                            dst[j * t + ti] += c * d[i * t + ti];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::Tsf { x, spec } => {
                let xs = self.shape(*x).to_vec();
                let (b, a, t) = (xs[0], xs[1], xs[2]);
                let nb = node.shape[1];
                let w = node.shape[3];
                let xv = self.value(*x);
                let gx = slot(grads, self, *x);
                for bi in 0..b {
                    for ai in 0..a {
                        let base = (bi * a + ai) * t;
                        for k in 0..nb {
                            let range = spec.block_range(k);
                            let u = &dy[((bi * nb + k) * a + ai) * w..][..w - 3];
                            let (lo, hi) = (base + range.start, base + range.end);
                            spec.vjp_block(&xv[lo..hi], u, &mut gx[lo..hi]);
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let k = self.shape(*logits)[1];
                let s = dy[0] / labels.len() as f64;
                let gl = slot(grads, self, *logits);
                for (r, &l) in labels.iter().enumerate() {
                    for c in 0..k {
                        let onehot = if c == l { 1.0 } else { 0.0 };
                        gl[r * k + c] += s * (probs[r * k + c] - onehot);
                    }
                }
            }
            Op::BinarizeSt(x) => {
                for (g, d) in slot(grads, self, *x).iter_mut().zip(dy) {
                    *g += d;
                }
            }
        }
    }
}
