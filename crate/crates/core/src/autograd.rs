//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] is a Wengert list: every node holds its forward value and, when
//! any input requires a gradient, the primitive that produced it. Operations
//! whose inputs are all constant are folded into constant leaves and never
//! replayed. [`Tape::backward`] walks the list once in reverse.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A run of leading key positions in attention whose unnormalized weights are
/// multiplied by a per-example gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeySegment {
    pub len: usize,
    /// Per-example gate of shape `[B]`; `None` leaves the weights untouched.
    pub gate: Option<Var>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        trans_b: bool,
        batched: bool,
        m: usize,
        k: usize,
        n: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleRows(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    AttnSoftmax {
        scores: Var,
        segments: Vec<KeySegment>,
        // e_j / Z, i.e. the probability before the gate factor
        ungated: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
    Mean(Var),
    SumLast(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat {
        a: Var,
        b: Var,
        axis: usize,
    },
    Slice {
        a: Var,
        axis: usize,
        start: usize,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    BroadcastLeading(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul { a, b, .. }
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::ScaleRows(a, b)
            | Op::Concat { a, b, .. } => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Gelu(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumLast(a)
            | Op::Reshape(a)
            | Op::Permute(a, _)
            | Op::Slice { a, .. }
            | Op::BroadcastLeading(a) => vec![*a],
            Op::LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::AttnSoftmax {
                scores, segments, ..
            } => {
                let mut v = vec![*scores];
                v.extend(segments.iter().filter_map(|s| s.gate));
                v
            }
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::Gather { table, .. } => vec![*table],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Gradients produced by [`Tape::backward`], one per reached leaf that
/// requires a gradient.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    ops_visited: usize,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }

    /// Number of recorded operations replayed during the backward pass.
    pub fn ops_visited(&self) -> usize {
        self.ops_visited
    }
}

/// Single-owner record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn suffix_of(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if b.len() <= a.len() && a[a.len() - b.len()..] == *b {
        Ok(())
    } else {
        Err(Error::dim(op, a, b))
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

fn permute_data(data: &[f64], shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let rank = shape.len();
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    for _ in 0..n {
        let off: usize = (0..rank).map(|d| idx[d] * in_strides[axes[d]]).sum();
        out.push(data[off]);
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// `c[m×n] += op(a)[m×k] · op(b)[k×n]`, where a transposed operand is stored
/// with its logical dimensions swapped.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64]) {
    if tb && !ta {
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &b[j * k..(j + 1) * k];
                let dot: f64 = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
                c[i * n + j] += dot;
            }
        }
        return;
    }
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = if ta { a[p * m + i] } else { a[i * k + p] };
            if tb {
                for (j, cv) in crow.iter_mut().enumerate() {
                    *cv += av * b[j * k + p];
                }
            } else {
                let brow = &b[p * n..(p + 1) * n];
                for (cv, bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * core::f64::consts::FRAC_1_SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * core::f64::consts::FRAC_1_SQRT_2));
    cdf + x * FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of nodes, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of operations recorded for replay.
    pub fn recorded_ops(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| !matches!(n.op, Op::Leaf))
            .count()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    /// `a[..., m, k] · b[k, n]`, with `b` shared across the leading axes of `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false, false)
    }

    /// `a[..., m, k] · bᵀ` for `b[n, k]`; the usual form of a linear layer.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true, false)
    }

    /// Batched `a[..., m, k] · b[..., k, n]` with identical leading axes.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false, true)
    }

    /// Batched `a[..., m, k] · b[..., n, k]ᵀ` with identical leading axes.
    pub fn bmm_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool, batched: bool) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let err = || Error::dim("matmul", &sa, &sb);
        if sa.len() < 2 || sb.len() < 2 || (!batched && sb.len() != 2) {
            return Err(err());
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (bk, n) = if trans_b {
            (sb[sb.len() - 1], sb[sb.len() - 2])
        } else {
            (sb[sb.len() - 2], sb[sb.len() - 1])
        };
        if k != bk {
            return Err(err());
        }
        if batched && (sa.len() != sb.len() || sa[..sa.len() - 2] != sb[..sb.len() - 2]) {
            return Err(err());
        }
        let mut out_shape = sa[..sa.len() - 1].to_vec();
        out_shape.push(n);
        let mut out = vec![0.0; numel(&out_shape)];
        let (da, db) = (self.data(a), self.data(b));
        if batched {
            let batches = numel(&sa[..sa.len() - 2]);
            for t in 0..batches {
                gemm(
                    m,
                    k,
                    n,
                    &da[t * m * k..(t + 1) * m * k],
                    false,
                    &db[t * k * n..(t + 1) * k * n],
                    trans_b,
                    &mut out[t * m * n..(t + 1) * m * n],
                );
            }
        } else {
            let rows = da.len() / k.max(1);
            gemm(rows, k, n, da, false, db, trans_b, &mut out);
        }
        let value = Tensor::new(&out_shape, out)?;
        Ok(self.push(
            value,
            Op::MatMul {
                a,
                b,
                trans_b,
                batched,
                m,
                k,
                n,
            },
        ))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let sa = self.shape(a);
        suffix_of(name, sa, self.shape(b))?;
        let (da, db) = (self.data(a), self.data(b));
        let nb = db.len();
        let data = da
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, db[i % nb]))
            .collect();
        Tensor::new(sa, data)
    }

    /// Elementwise `a + b`; `b`'s shape must be a trailing suffix of `a`'s
    /// (or the other way round).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.order_for_broadcast(a, b);
        let value = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Elementwise `a - b`; `b`'s shape must be a trailing suffix of `a`'s.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise `a ∘ b` with trailing-suffix broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.order_for_broadcast(a, b);
        let value = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    fn order_for_broadcast(&self, a: Var, b: Var) -> (Var, Var) {
        if self.shape(a).len() < self.shape(b).len() {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Multiplies each leading-index block of `a` by one entry of `s`; the
    /// shape of `s` must be a leading prefix of `a`'s.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let ss = self.shape(s).to_vec();
        if ss.len() > sa.len() || sa[..ss.len()] != *ss {
            return Err(Error::dim("scale_rows", &sa, &ss));
        }
        let (da, ds) = (self.data(a), self.data(s));
        let inner = da.len() / ds.len().max(1);
        let data = da
            .iter()
            .enumerate()
            .map(|(i, &x)| x * ds[i / inner])
            .collect();
        let value = Tensor::new(&sa, data)?;
        Ok(self.push(value, Op::ScaleRows(a, s)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape(), t.data().iter().map(|x| x * c).collect())
            .expect("shape preserved");
        self.push(value, Op::Scale(a, c))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape(), t.data().iter().map(|&x| f(x)).collect()).expect("shape preserved")
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.unary(a, sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.unary(a, libm::tanh);
        self.push(value, Op::Tanh(a))
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.unary(a, gelu);
        self.push(value, Op::Gelu(a))
    }

    /// Normalizes the last axis to zero mean and unit variance, then applies
    /// `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let h = *sx.last().ok_or_else(|| Error::dim("layer_norm", &sx, &[]))?;
        for p in [gamma, beta] {
            if self.shape(p) != [h] {
                return Err(Error::dim("layer_norm", &sx, self.shape(p)));
            }
        }
        if !(eps > 0.0) {
            return Err(Error::Config("layer norm eps must be positive".into()));
        }
        let (dx, dg, db) = (self.data(x), self.data(gamma), self.data(beta));
        let rows = dx.len() / h;
        let mut out = Vec::with_capacity(dx.len());
        let mut xhat = Vec::with_capacity(dx.len());
        let mut rstd = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &dx[r * h..(r + 1) * h];
            let mean = row.iter().sum::<f64>() / h as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            let rs = 1.0 / libm::sqrt(var + eps);
            rstd.push(rs);
            for (j, v) in row.iter().enumerate() {
                let xh = (v - mean) * rs;
                xhat.push(xh);
                out.push(xh * dg[j] + db[j]);
            }
        }
        let value = Tensor::new(&sx, out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        ))
    }

    /// Attention softmax over the last axis of `scores[B, ..., N]`.
    ///
    /// `key_mask[B × N]` marks attendable keys; masked keys get exactly zero
    /// weight. The leading keys are split into `segments`, each optionally
    /// gated: a gate `g` multiplies the unnormalized weights of its keys
    /// before normalization, so `g = 0` removes them and `g = 1` is a plain
    /// softmax.
    pub fn attn_softmax(
        &mut self,
        scores: Var,
        key_mask: &[bool],
        segments: &[KeySegment],
    ) -> Result<Var> {
        let ss = self.shape(scores).to_vec();
        if ss.len() < 2 {
            return Err(Error::dim("attn_softmax", &ss, &[]));
        }
        let batch = ss[0];
        let n = ss[ss.len() - 1];
        if key_mask.len() != batch * n {
            return Err(Error::dim("attn_softmax", &ss, &[key_mask.len()]));
        }
        let seg_total: usize = segments.iter().map(|s| s.len).sum();
        if seg_total > n {
            return Err(Error::dim("attn_softmax", &ss, &[seg_total]));
        }
        // per-key gate lookup: segment index or none
        let mut seg_of = vec![usize::MAX; n];
        let mut off = 0;
        for (si, s) in segments.iter().enumerate() {
            if let Some(g) = s.gate {
                if self.shape(g) != [batch] {
                    return Err(Error::dim("attn_softmax gate", &[batch], self.shape(g)));
                }
            }
            seg_of[off..off + s.len].fill(si);
            off += s.len;
        }
        let gates: Vec<Option<&[f64]>> = segments
            .iter()
            .map(|s| s.gate.map(|g| self.data(g)))
            .collect();
        let data = self.data(scores);
        let rows = data.len() / n;
        let rows_per_batch = rows / batch;
        let mut out = vec![0.0; data.len()];
        let mut ungated = vec![0.0; data.len()];
        for r in 0..rows {
            let b = r / rows_per_batch;
            let mask = &key_mask[b * n..(b + 1) * n];
            let row = &data[r * n..(r + 1) * n];
            let max = row
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let (o, u) = (&mut out[r * n..(r + 1) * n], &mut ungated[r * n..(r + 1) * n]);
            let mut z = 0.0;
            for j in 0..n {
                if !mask[j] {
                    continue;
                }
                let e = libm::exp(row[j] - max);
                u[j] = e;
                let g = match seg_of[j] {
                    usize::MAX => 1.0,
                    si => gates[si].map_or(1.0, |gd| gd[b]),
                };
                o[j] = e * g;
                z += e * g;
            }
            if z > 0.0 {
                for j in 0..n {
                    o[j] /= z;
                    u[j] /= z;
                }
            }
        }
        let value = Tensor::new(&ss, out)?;
        Ok(self.push(
            value,
            Op::AttnSoftmax {
                scores,
                segments: segments.to_vec(),
                ungated,
            },
        ))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let sl = self.shape(logits).to_vec();
        if sl.len() != 2 || sl[0] != labels.len() {
            return Err(Error::dim("softmax_cross_entropy", &sl, &[labels.len()]));
        }
        let c = sl[1];
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Input(alloc::format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let data = self.data(logits);
        let mut probs = Vec::with_capacity(data.len());
        let mut total = 0.0;
        for (b, &label) in labels.iter().enumerate() {
            let row = &data[b * c..(b + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            total += lse - row[label];
            probs.extend(row.iter().map(|v| libm::exp(v - lse)));
        }
        let loss = total / labels.len().max(1) as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.sum() / t.len().max(1) as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Sums over the last axis, dropping it.
    pub fn sum_last(&mut self, a: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let n = *sa.last().ok_or_else(|| Error::dim("sum_last", &sa, &[]))?;
        let data = self.data(a).chunks(n.max(1)).map(|c| c.iter().sum()).collect();
        let value = Tensor::new(&sa[..sa.len() - 1], data)?;
        Ok(self.push(value, Op::SumLast(a)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(a)))
    }

    /// Reorders axes: output axis `d` is input axis `axes[d]`.
    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let mut seen = vec![false; sa.len()];
        if axes.len() != sa.len() || axes.iter().any(|&x| x >= sa.len() || core::mem::replace(&mut seen[x], true)) {
            return Err(Error::dim("permute", &sa, axes));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&x| sa[x]).collect();
        let value = Tensor::new(&out_shape, permute_data(self.data(a), &sa, axes))?;
        Ok(self.push(value, Op::Permute(a, axes.to_vec())))
    }

    /// Concatenates along `axis`; all other axes must agree.
    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let ok = sa.len() == sb.len()
            && axis < sa.len()
            && (0..sa.len()).all(|d| d == axis || sa[d] == sb[d]);
        if !ok {
            return Err(Error::dim("concat", &sa, &sb));
        }
        let outer = numel(&sa[..axis]);
        let inner = numel(&sa[axis + 1..]);
        let (ba, bb) = (sa[axis] * inner, sb[axis] * inner);
        let (da, db) = (self.data(a), self.data(b));
        let mut out = Vec::with_capacity(da.len() + db.len());
        for o in 0..outer {
            out.extend_from_slice(&da[o * ba..(o + 1) * ba]);
            out.extend_from_slice(&db[o * bb..(o + 1) * bb]);
        }
        let mut shape = sa.clone();
        shape[axis] += sb[axis];
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(value, Op::Concat { a, b, axis }))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        if axis >= sa.len() || start + len > sa[axis] {
            return Err(Error::dim("slice", &sa, &[axis, start, len]));
        }
        let outer = numel(&sa[..axis]);
        let inner = numel(&sa[axis + 1..]);
        let block = sa[axis] * inner;
        let da = self.data(a);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * block + start * inner;
            out.extend_from_slice(&da[base..base + len * inner]);
        }
        let mut shape = sa;
        shape[axis] = len;
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(value, Op::Slice { a, axis, start }))
    }

    /// Row lookup `table[ids]` for `table[V, H]`, giving `[ids.len(), H]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let st = self.shape(table).to_vec();
        if st.len() != 2 {
            return Err(Error::dim("gather", &st, &[]));
        }
        let (v, h) = (st[0], st[1]);
        if let Some(bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Input(alloc::format!(
                "index {bad} out of range for table of {v} rows"
            )));
        }
        let dt = self.data(table);
        let mut out = Vec::with_capacity(ids.len() * h);
        for &i in ids {
            out.extend_from_slice(&dt[i * h..(i + 1) * h]);
        }
        let value = Tensor::new(&[ids.len(), h], out)?;
        Ok(self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Repeats `a` along a new leading axis of length `n`.
    pub fn broadcast_leading(&mut self, a: Var, n: usize) -> Var {
        let t = self.value(a);
        let mut shape = vec![n];
        shape.extend_from_slice(t.shape());
        let mut out = Vec::with_capacity(n * t.len());
        for _ in 0..n {
            out.extend_from_slice(t.data());
        }
        let value = Tensor::new(&shape, out).expect("shape matches data");
        self.push(value, Op::BroadcastLeading(a))
    }

    /// Inverted dropout: zeroes entries with probability `p` and rescales the
    /// survivors by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if p <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - p;
        let shape = self.shape(x).to_vec();
        let mask = (0..numel(&shape))
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let m = self.constant(Tensor::new(&shape, mask)?);
        self.mul(x, m)
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Every recorded operation reachable from `loss` is replayed exactly once.
    /// Leaves created with `requires_grad = false` never receive a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::Usage(alloc::format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        let mut visited = 0;
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
            for i in (0..=loss.0).rev() {
                if matches!(self.nodes[i].op, Op::Leaf) {
                    continue;
                }
                let Some(g) = grads[i].take() else { continue };
                visited += 1;
                self.backprop(i, &g, &mut grads);
            }
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let node = &self.nodes[i];
                match (g, &node.op, node.requires_grad) {
                    (Some(g), Op::Leaf, true) => {
                        Some(Tensor::new(node.value.shape(), g).expect("gradient shape"))
                    }
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients {
            grads,
            ops_visited: visited,
        })
    }

    fn backprop(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let node = &nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul {
                a,
                b,
                trans_b,
                batched,
                m,
                k,
                n,
            } => {
                let (da, db) = (self.data(a), self.data(b));
                if batched {
                    let batches = da.len() / (m * k).max(1);
                    acc(a, &mut |ga| {
                        for t in 0..batches {
                            let gs = &g[t * m * n..(t + 1) * m * n];
                            let bs = &db[t * k * n..(t + 1) * k * n];
                            gemm(m, n, k, gs, false, bs, !trans_b, &mut ga[t * m * k..(t + 1) * m * k]);
                        }
                    });
                    acc(b, &mut |gb| {
                        for t in 0..batches {
                            let gs = &g[t * m * n..(t + 1) * m * n];
                            let as_ = &da[t * m * k..(t + 1) * m * k];
                            let gbs = &mut gb[t * k * n..(t + 1) * k * n];
                            if trans_b {
                                gemm(n, m, k, gs, true, as_, false, gbs);
                            } else {
                                gemm(k, m, n, as_, true, gs, false, gbs);
                            }
                        }
                    });
                } else {
                    let rows = da.len() / k.max(1);
                    acc(a, &mut |ga| gemm(rows, n, k, g, false, db, !trans_b, ga));
                    acc(b, &mut |gb| {
                        if trans_b {
                            gemm(n, rows, k, g, true, da, false, gb);
                        } else {
                            gemm(k, rows, n, da, true, g, false, gb);
                        }
                    });
                }
            }
            &Op::Add(a, b) | &Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                acc(a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(b, &mut |gb| {
                    let nb = gb.len();
                    for (j, y) in g.iter().enumerate() {
                        gb[j % nb] += sign * y;
                    }
                });
            }
            &Op::Mul(a, b) => {
                let (da, db) = (self.data(a), self.data(b));
                let nb = db.len();
                acc(a, &mut |ga| {
                    for (j, x) in ga.iter_mut().enumerate() {
                        *x += g[j] * db[j % nb];
                    }
                });
                acc(b, &mut |gb| {
                    for (j, y) in g.iter().enumerate() {
                        gb[j % nb] += y * da[j];
                    }
                });
            }
            &Op::ScaleRows(a, s) => {
                let (da, ds) = (self.data(a), self.data(s));
                let inner = da.len() / ds.len().max(1);
                acc(a, &mut |ga| {
                    for (j, x) in ga.iter_mut().enumerate() {
                        *x += g[j] * ds[j / inner];
                    }
                });
                acc(s, &mut |gs| {
                    for (j, y) in g.iter().enumerate() {
                        gs[j / inner] += y * da[j];
                    }
                });
            }
            &Op::Scale(a, c) => acc(a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y)),
            &Op::Sigmoid(a) => acc(a, &mut |ga| {
                for j in 0..ga.len() {
                    ga[j] += g[j] * out[j] * (1.0 - out[j]);
                }
            }),
            &Op::Tanh(a) => acc(a, &mut |ga| {
                for j in 0..ga.len() {
                    ga[j] += g[j] * (1.0 - out[j] * out[j]);
                }
            }),
            &Op::Gelu(a) => {
                let da = self.data(a);
                acc(a, &mut |ga| {
                    for j in 0..ga.len() {
                        ga[j] += g[j] * gelu_grad(da[j]);
                    }
                })
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let dg = self.data(*gamma);
                let h = dg.len();
                let rows = g.len() / h;
                acc(*gamma, &mut |gg| {
                    for j in 0..g.len() {
                        gg[j % h] += g[j] * xhat[j];
                    }
                });
                acc(*beta, &mut |gb| {
                    for j in 0..g.len() {
                        gb[j % h] += g[j];
                    }
                });
                acc(*x, &mut |gx| {
                    for r in 0..rows {
                        let gr = &g[r * h..(r + 1) * h];
                        let xr = &xhat[r * h..(r + 1) * h];
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for j in 0..h {
                            let dxh = gr[j] * dg[j];
                            m1 += dxh;
                            m2 += dxh * xr[j];
                        }
                        m1 /= h as f64;
                        m2 /= h as f64;
                        for j in 0..h {
                            let dxh = gr[j] * dg[j];
                            gx[r * h + j] += rstd[r] * (dxh - m1 - xr[j] * m2);
                        }
                    }
                });
            }
            Op::AttnSoftmax {
                scores,
                segments,
                ungated,
            } => {
                let ss = self.shape(*scores);
                let batch = ss[0];
                let n = ss[ss.len() - 1];
                let rows = out.len() / n;
                let rows_per_batch = rows / batch;
                // dot_r = Σ_k y_k dy_k per row
                let dots: Vec<f64> = (0..rows)
                    .map(|r| (0..n).map(|j| out[r * n + j] * g[r * n + j]).sum())
                    .collect();
                acc(*scores, &mut |gs| {
                    for r in 0..rows {
                        for j in 0..n {
                            let idx = r * n + j;
                            gs[idx] += out[idx] * (g[idx] - dots[r]);
                        }
                    }
                });
                let mut off = 0;
                for seg in segments {
                    if let Some(gate) = seg.gate {
                        acc(gate, &mut |gg| {
                            for r in 0..rows {
                                let b = r / rows_per_batch;
                                for j in off..off + seg.len {
                                    let idx = r * n + j;
                                    gg[b] += ungated[idx] * (g[idx] - dots[r]);
                                }
                            }
                        });
                    }
                    off += seg.len;
                }
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let batch = labels.len();
                let c = probs.len() / batch.max(1);
                let scale = g[0] / batch.max(1) as f64;
                acc(*logits, &mut |gl| {
                    for (b, &label) in labels.iter().enumerate() {
                        for j in 0..c {
                            let onehot = if j == label { 1.0 } else { 0.0 };
                            gl[b * c + j] += scale * (probs[b * c + j] - onehot);
                        }
                    }
                });
            }
            &Op::Sum(a) => acc(a, &mut |ga| ga.iter_mut().for_each(|x| *x += g[0])),
            &Op::Mean(a) => acc(a, &mut |ga| {
                let s = g[0] / ga.len().max(1) as f64;
                ga.iter_mut().for_each(|x| *x += s);
            }),
            &Op::SumLast(a) => acc(a, &mut |ga| {
                let n = ga.len() / g.len().max(1);
                for (j, x) in ga.iter_mut().enumerate() {
                    *x += g[j / n];
                }
            }),
            &Op::Reshape(a) => acc(a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)),
            Op::Permute(a, axes) => {
                let mut inv = vec![0; axes.len()];
                for (d, &x) in axes.iter().enumerate() {
                    inv[x] = d;
                }
                let back = permute_data(g, node.value.shape(), &inv);
                acc(*a, &mut |ga| ga.iter_mut().zip(&back).for_each(|(x, y)| *x += y));
            }
            &Op::Concat { a, b, axis } => {
                let sa = self.shape(a);
                let sb = self.shape(b);
                let outer = numel(&sa[..axis]);
                let inner = numel(&sa[axis + 1..]);
                let (ba, bb) = (sa[axis] * inner, sb[axis] * inner);
                acc(a, &mut |ga| {
                    for o in 0..outer {
                        let src = &g[o * (ba + bb)..o * (ba + bb) + ba];
                        ga[o * ba..(o + 1) * ba].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                });
                acc(b, &mut |gb| {
                    for o in 0..outer {
                        let src = &g[o * (ba + bb) + ba..(o + 1) * (ba + bb)];
                        gb[o * bb..(o + 1) * bb].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                });
            }
            &Op::Slice { a, axis, start } => {
                let sa = self.shape(a);
                let len = node.value.shape()[axis];
                let outer = numel(&sa[..axis]);
                let inner = numel(&sa[axis + 1..]);
                let block = sa[axis] * inner;
                acc(a, &mut |ga| {
                    for o in 0..outer {
                        let base = o * block + start * inner;
                        let src = &g[o * len * inner..(o + 1) * len * inner];
                        ga[base..base + len * inner].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Gather { table, ids } => {
                let h = self.shape(*table)[1];
                acc(*table, &mut |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..h {
                            gt[id * h + j] += g[r * h + j];
                        }
                    }
                });
            }
            &Op::BroadcastLeading(a) => acc(a, &mut |ga| {
                let len = ga.len();
                for (j, y) in g.iter().enumerate() {
                    ga[j % len] += y;
                }
            }),
        }
    }
}
