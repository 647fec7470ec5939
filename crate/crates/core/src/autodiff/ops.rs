use std::sync::Arc;

use rand::Rng;

use super::{numel, tag_columns, Graph, Mode, Op, Var};
use crate::error::{Error, Result};
use crate::rotation::{rodrigues_jacobian, rodrigues_matrix, RotationParams};
use crate::signal::AxisTag;
use crate::tsf::BlockSpec;

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

fn shape_err(op: &str, detail: String) -> Error {
    Error::config(format!("{op}: {detail}"))
}

/// Output shape and per-operand strides (0 on broadcast dims) for a
/// same-rank elementwise operation.
pub(crate) struct Broadcast {
    pub out: Vec<usize>,
    pub sa: Vec<usize>,
    pub sb: Vec<usize>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl Broadcast {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(shape_err("broadcast", format!("rank mismatch {a:?} vs {b:?}")));
        }
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            if x == y || y == 1 {
                out.push(x);
            } else if x == 1 {
                out.push(y);
            } else {
                return Err(shape_err("broadcast", format!("incompatible shapes {a:?} and {b:?}")));
            }
        }
        let (fa, fb) = (strides(a), strides(b));
        let sa = a.iter().zip(fa).map(|(&d, s)| if d == 1 { 0 } else { s }).collect();
        let sb = b.iter().zip(fb).map(|(&d, s)| if d == 1 { 0 } else { s }).collect();
        Ok(Broadcast { out, sa, sb })
    }

    /// Calls `f(out_index, a_index, b_index)` for every output element in order.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        let n = numel(&self.out);
        if n == 0 {
            return;
        }
        let rank = self.out.len();
        let mut idx = vec![0usize; rank];
        let (mut ia, mut ib) = (0usize, 0usize);
        for o in 0..n {
            f(o, ia, ib);
            for d in (0..rank).rev() {
                idx[d] += 1;
                ia += self.sa[d];
                ib += self.sb[d];
                if idx[d] < self.out[d] {
                    break;
                }
                ia -= self.sa[d] * idx[d];
                ib -= self.sb[d] * idx[d];
                idx[d] = 0;
            }
        }
    }
}

/// `c[m,n] += a[m,k] * b[k,n]` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: every index touched is within the slices given the strides
    // computed by the callers for row-major buffers of matching sizes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Graph<'p> {
    /// `x[..., in] @ w[in, out] + b[out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let inner = *xs.last().ok_or_else(|| shape_err("affine", "scalar input".into()))?;
        if ws.len() != 2 || ws[0] != inner {
            return Err(shape_err("affine", format!("input {xs:?} against weight {ws:?}")));
        }
        let out = ws[1];
        if let Some(b) = b {
            if self.shape(b) != [out] {
                return Err(shape_err("affine", format!("bias {:?} for {out} outputs", self.shape(b))));
            }
        }
        let m = numel(&xs) / inner.max(1);
        let mut y = vec![0.0; m * out];
        if let Some(b) = b {
            let bv = self.value(b);
            for row in y.chunks_mut(out) {
                row.copy_from_slice(bv);
            }
        }
        gemm(m, inner, out, self.value(x), (inner, 1), self.value(w), (out, 1), &mut y);
        let mut shape = xs;
        *shape.last_mut().unwrap() = out;
        let rg = self.any_grad(&[x, w]) || b.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(shape, y, Op::Affine { x, w, b }, rg))
    }

    /// Normalizes over the last dimension, then scales and shifts.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().ok_or_else(|| shape_err("layer_norm", "scalar input".into()))?;
        if d == 0 || self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(shape_err("layer_norm", format!("input {shape:?} with scale/shift of wrong width")));
        }
        let xv = self.value(x);
        let (g, bt) = (self.value(gamma), self.value(beta));
        let rows = xv.len() / d;
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        let mut y = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mu = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = rs;
            for i in 0..d {
                let h = (row[i] - mu) * rs;
                xhat[r * d + i] = h;
                y[r * d + i] = g[i] * h + bt[i];
            }
        }
        let rg = self.any_grad(&[x, gamma, beta]);
        Ok(self.push(
            shape,
            y,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let y = self.value(x).iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect();
        self.unary(x, y, Op::LeakyRelu { x, slope })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|v| v.tanh()).collect();
        self.unary(x, y, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.unary(x, y, Op::Sigmoid(x))
    }

    /// Softmax over the last dimension.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let d = self.shape(x).last().copied().unwrap_or(0);
        if d == 0 {
            return Err(shape_err("softmax", "empty dimension".into()));
        }
        let mut y = self.value(x).to_vec();
        for row in y.chunks_mut(d) {
            softmax_in_place(row);
        }
        Ok(self.unary(x, y, Op::Softmax(x)))
    }

    /// Inverted dropout in training mode, identity otherwise.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
        }
        let Mode::Train { rng } = &mut self.mode else {
            return Ok(x);
        };
        if rate == 0.0 {
            return Ok(x);
        }
        let n = numel(&self.nodes[x.0].shape);
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
        let y = self.value(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        Ok(self.unary(x, y, Op::Dropout { x, mask }))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*parts.first().ok_or_else(|| shape_err("concat", "no inputs".into()))?)
            .to_vec();
        if axis >= first.len() {
            return Err(shape_err("concat", format!("axis {axis} for rank {}", first.len())));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let same = s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !same {
                return Err(shape_err("concat", format!("{s:?} does not match {first:?}")));
            }
            total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut y = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let chunk = self.shape(p)[axis] * inner;
                y.extend_from_slice(&self.value(p)[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = self.any_grad(parts);
        Ok(self.push(
            shape,
            y,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Elementwise product with broadcasting over size-1 dimensions.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let bc = Broadcast::new(self.shape(a), self.shape(b))?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut y = vec![0.0; numel(&bc.out)];
        bc.for_each(|o, i, j| y[o] = av[i] * bv[j]);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(bc.out, y, Op::Mul(a, b), rg))
    }

    /// Elementwise sum with broadcasting over size-1 dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let bc = Broadcast::new(self.shape(a), self.shape(b))?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut y = vec![0.0; numel(&bc.out)];
        bc.for_each(|o, i, j| y[o] = av[i] + bv[j]);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(bc.out, y, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x).iter().map(|v| v * c).collect();
        self.unary(x, y, Op::Scale { x, c })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let rg = self.requires_grad(x);
        self.push(vec![], vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        if v.is_empty() {
            return Err(shape_err("mean", "empty tensor".into()));
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.requires_grad(x);
        Ok(self.push(vec![], vec![m], Op::Mean(x), rg))
    }

    /// Euclidean norm along `axis`, which is removed from the shape.
    pub fn l2_norm(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(shape_err("l2_norm", format!("axis {axis} for rank {}", shape.len())));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let xv = self.value(x);
        let mut y = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let s: f64 = (0..n).map(|k| xv[(o * n + k) * inner + i].powi(2)).sum();
                y[o * inner + i] = s.sqrt();
            }
        }
        let mut out = shape;
        out.remove(axis);
        let rg = self.requires_grad(x);
        Ok(self.push(out, y, Op::L2Norm { x, axis }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if numel(&shape) != numel(self.shape(x)) {
            return Err(shape_err(
                "reshape",
                format!("{:?} into {shape:?}", self.shape(x)),
            ));
        }
        let y = self.value(x).to_vec();
        let rg = self.requires_grad(x);
        Ok(self.push(shape, y, Op::Reshape(x), rg))
    }

    /// Running sum along `axis`.
    pub fn cumsum(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(shape_err("cumsum", format!("axis {axis} for rank {}", shape.len())));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let mut y = self.value(x).to_vec();
        for o in 0..outer {
            for k in 1..n {
                for i in 0..inner {
                    y[(o * n + k) * inner + i] += y[(o * n + k - 1) * inner + i];
                }
            }
        }
        let rg = self.requires_grad(x);
        Ok(self.push(shape, y, Op::CumSum { x, axis }, rg))
    }

    /// Rotation matrices `[..., 3, 3]` from raw `[..., 4]` Rodrigues parameters.
    pub fn rodrigues(&mut self, p: Var) -> Result<Var> {
        let shape = self.shape(p).to_vec();
        if shape.last() != Some(&4) {
            return Err(shape_err("rodrigues", format!("expected trailing 4, got {shape:?}")));
        }
        let mut y = Vec::with_capacity(numel(&shape) / 4 * 9);
        for q in self.value(p).chunks(4) {
            let r = rodrigues_matrix(&RotationParams::from_array([q[0], q[1], q[2], q[3]]));
            y.extend(r.0.iter().flatten());
        }
        let mut out = shape;
        out.pop();
        out.extend([3, 3]);
        let rg = self.requires_grad(p);
        Ok(self.push(out, y, Op::Rodrigues(p), rg))
    }

    /// `r[B,H,3,3]` applied to every triad of `v[B,P,3,T]`, giving `[B,H,P,3,T]`.
    pub fn rotate(&mut self, r: Var, v: Var) -> Result<Var> {
        let (rs, vs) = (self.shape(r).to_vec(), self.shape(v).to_vec());
        if rs.len() != 4 || rs[2..] != [3, 3] || vs.len() != 4 || vs[2] != 3 || rs[0] != vs[0] {
            return Err(shape_err("rotate", format!("matrices {rs:?} against triads {vs:?}")));
        }
        let (b, h, p, t) = (rs[0], rs[1], vs[1], vs[3]);
        let (rv, vv) = (self.value(r), self.value(v));
        let mut y = vec![0.0; b * h * p * 3 * t];
        for bi in 0..b {
            for hi in 0..h {
                let m = &rv[(bi * h + hi) * 9..(bi * h + hi + 1) * 9];
                for pi in 0..p {
                    let src = &vv[(bi * p + pi) * 3 * t..(bi * p + pi + 1) * 3 * t];
                    let dst = &mut y[((bi * h + hi) * p + pi) * 3 * t..((bi * h + hi) * p + pi + 1) * 3 * t];
                    for i in 0..3 {
                        for j in 0..3 {
                            let c = m[i * 3 + j];
                            for ti in 0..t {
                                dst[i * t + ti] += c * src[j * t + ti];
                            }
                        }
                    }
                }
            }
        }
        let rg = self.any_grad(&[r, v]);
        Ok(self.push(vec![b, h, p, 3, t], y, Op::Rotate { r, v }, rg))
    }

    /// Block features of `x[B,A,T]` with tag columns, as `[B, blocks, A, width + 3]`.
    pub fn tsf(&mut self, x: Var, spec: Arc<BlockSpec>, tags: &[AxisTag]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 3 || tags.len() != shape[1] {
            return Err(shape_err(
                "tsf",
                format!("input {shape:?} with {} axis tags", tags.len()),
            ));
        }
        let (b, a, t) = (shape[0], shape[1], shape[2]);
        let nb = spec.block_count(t)?;
        let w = spec.feature_width();
        let tag_cols = tag_columns(tags);
        let xv = self.value(x);
        let mut y = vec![0.0; b * nb * a * (w + 3)];
        let mut buf = Vec::with_capacity(w);
        for bi in 0..b {
            for ai in 0..a {
                let series = &xv[(bi * a + ai) * t..(bi * a + ai + 1) * t];
                for k in 0..nb {
                    buf.clear();
                    spec.eval_block(&series[spec.block_range(k)], &mut buf);
                    let at = ((bi * nb + k) * a + ai) * (w + 3);
                    y[at..at + w].copy_from_slice(&buf);
                    y[at + w..at + w + 3].copy_from_slice(&tag_cols[ai]);
                }
            }
        }
        let rg = self.requires_grad(x);
        Ok(self.push(vec![b, nb, a, w + 3], y, Op::Tsf { x, spec }, rg))
    }

    /// Mean categorical cross-entropy of `logits[B,K]` against integer labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() || shape[0] == 0 || shape[1] == 0 {
            return Err(shape_err(
                "cross_entropy",
                format!("logits {shape:?} with {} labels", labels.len()),
            ));
        }
        let k = shape[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(shape_err("cross_entropy", format!("label {bad} with {k} classes")));
        }
        let mut probs = self.value(logits).to_vec();
        let mut loss = 0.0;
        for (row, &l) in probs.chunks_mut(k).zip(labels) {
            let lse = log_sum_exp(row);
            loss += lse - row[l];
            softmax_in_place(row);
        }
        loss /= labels.len() as f64;
        let rg = self.requires_grad(logits);
        Ok(self.push(
            vec![],
            vec![loss],
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Thresholds at 0.5 with an identity gradient.
    pub fn binarize_st(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect();
        self.unary(x, y, Op::BinarizeSt(x))
    }

    fn unary(&mut self, x: Var, y: Vec<f64>, op: Op) -> Var {
        let shape = self.shape(x).to_vec();
        let rg = self.requires_grad(x);
        self.push(shape, y, op, rg)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}

pub(crate) fn rodrigues_vjp(p: &[f64], upstream: &[f64], grad: &mut [f64]) {
    let jac = rodrigues_jacobian(&RotationParams::from_array([p[0], p[1], p[2], p[3]]));
    for i in 0..3 {
        for j in 0..3 {
            let u = upstream[i * 3 + j];
            for k in 0..4 {
                grad[k] += u * jac[i][j][k];
            }
        }
    }
}
