//! Reverse-mode tape.
//!
//! Ops execute eagerly; each appends one node holding its output and enough
//! saved state for the backward rule. Nodes are only ever appended, so node
//! order is execution order and `backward` visits them in exact reverse.

use crate::error::{mismatch, NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{matmul_into, transpose_raw, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

pub const LAYER_NORM_EPS: f64 = 1e-5;

enum Value<'p, S> {
    Owned(Tensor<S>),
    Borrowed(&'p Tensor<S>),
}

impl<S> Value<'_, S> {
    fn get(&self) -> &Tensor<S> {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<S>,
        inv_std: Vec<S>,
    },
    Gelu(Var),
    Sigmoid(Var),
    Reshape(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows {
        x: Var,
        idx: Vec<usize>,
    },
    MaxRows {
        x: Var,
        argmax: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    L2(Var, Var),
    CrossEntropy {
        logits: Var,
        classes: Vec<usize>,
        probs: Vec<S>,
    },
    BceLogits {
        logits: Var,
        labels: Vec<S>,
    },
    #[cfg(test)]
    BrokenDouble(Var),
}

struct Node<'p, S> {
    value: Value<'p, S>,
    op: Op<S>,
    param: Option<ParamId>,
}

/// Record of executed ops. Parameters are borrowed from a store for `'p`.
pub struct Tape<'p, S> {
    nodes: Vec<Node<'p, S>>,
}

impl<S: Scalar> Default for Tape<'_, S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients<S> {
    nodes: Vec<Option<Tensor<S>>>,
    params: Vec<(ParamId, usize)>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient with respect to a node, if the loss depends on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<S>> {
        self.nodes[v.0].as_ref()
    }

    /// Total gradient of a parameter over all of its leaves on the tape.
    pub fn param_grad(&self, id: ParamId) -> Option<Tensor<S>> {
        let mut total: Option<Tensor<S>> = None;
        for &(pid, node) in &self.params {
            if pid != id {
                continue;
            }
            if let Some(g) = &self.nodes[node] {
                match &mut total {
                    Some(t) => t.add_assign(g).expect("same parameter shape"),
                    None => total = Some(g.clone()),
                }
            }
        }
        total
    }

    /// Adds every parameter gradient into `store` (`grad += dL/dp`).
    pub fn accumulate_into(&self, store: &mut ParamStore<S>) -> Result<()> {
        for &(id, node) in &self.params {
            if let Some(g) = &self.nodes[node] {
                store.get_mut(id).grad.add_assign(g)?;
            }
        }
        Ok(())
    }

    /// Same as [`accumulate_into`](Self::accumulate_into) but scaled by `factor`.
    pub fn accumulate_scaled(&self, store: &mut ParamStore<S>, factor: S) -> Result<()> {
        for &(id, node) in &self.params {
            if let Some(g) = &self.nodes[node] {
                let p = store.get_mut(id);
                if p.grad.shape() != g.shape() {
                    return Err(mismatch("accumulate", p.grad.shape(), g.shape()));
                }
                for (a, &b) in p.grad.data_mut().iter_mut().zip(g.data()) {
                    *a += factor * b;
                }
            }
        }
        Ok(())
    }
}

fn broadcast_ok(lhs: &[usize], rhs: &[usize]) -> bool {
    rhs.len() <= lhs.len() && lhs[lhs.len() - rhs.len()..] == *rhs
}

fn gelu_parts<S: Scalar>(x: S) -> (S, S) {
    // tanh approximation
    let k = S::lit((2.0 / std::f64::consts::PI).sqrt());
    let c = S::lit(0.044715);
    let half = S::lit(0.5);
    let inner = k * (x + c * x * x * x);
    let t = inner.tanh();
    let y = half * x * (S::one() + t);
    let dy = half * (S::one() + t)
        + half * x * (S::one() - t * t) * k * (S::one() + S::lit(3.0) * c * x * x);
    (y, dy)
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl<'p, S: Scalar> Tape<'p, S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        self.nodes[v.0].value.get()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        debug_assert!(value.all_finite(), "non-finite tensor produced on tape");
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Untracked input.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Parameter leaf; its gradient is reported by `backward`.
    pub fn param(&mut self, store: &'p ParamStore<S>, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(store.value(id)),
            op: Op::Leaf,
            param: Some(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Copy of `v` that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        Ok(self.push(out, Op::Transpose(a)))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !broadcast_ok(ta.shape(), tb.shape()) {
            return Err(mismatch(name, ta.shape(), tb.shape()));
        }
        let n = tb.len();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, tb.data()[i % n]))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    /// `a + b` where `b`'s shape is a suffix of `a`'s (broadcast over leading axes).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product with the same broadcasting rule as [`add`](Self::add).
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.push(out, Op::Scale(a, c))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let mut out = t.clone();
        for r in 0..t.rows() {
            softmax_row(out.row_mut(r));
        }
        self.push(out, Op::Softmax(a))
    }

    /// Layer normalization over the last axis with learned `gamma`/`beta` of width `cols`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let t = self.value(x);
        let cols = t.cols();
        for g in [gamma, beta] {
            if self.shape(g) != [cols] {
                return Err(mismatch("layer_norm", t.shape(), self.shape(g)));
            }
        }
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let eps = S::lit(LAYER_NORM_EPS);
        let n = S::from_usize(cols).unwrap();
        let mut xhat = Vec::with_capacity(t.len());
        let mut inv_std = Vec::with_capacity(t.rows());
        let mut out = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            let row = t.row(r);
            let mean = row.iter().copied().sum::<S>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
            let is = S::one() / (var + eps).sqrt();
            inv_std.push(is);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                out.push(h * gv[j] + bv[j]);
            }
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| gelu_parts(x).0);
        self.push(out, Op::Gelu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// `x · W + b` with `x: [n, in]`, `W: [in, out]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let h = self.matmul(x, w)?;
        self.add(h, b)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// Columns `start..start+len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        if t.shape().len() != 2 || len == 0 || start + len > t.cols() {
            return Err(NnError::IndexOutOfRange {
                op: "slice_cols",
                index: start + len,
                bound: t.cols(),
            });
        }
        let rows = t.rows();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&t.row(r)[start..start + len]);
        }
        let out = Tensor::new(vec![rows, len], data)?;
        Ok(self.push(out, Op::SliceCols { x, start }))
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| NnError::InvalidTensor("concat_cols of nothing".into()))?;
        let rows = self.value(first).rows();
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(mismatch("concat_cols", self.shape(first), s));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(vec![rows, total], data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Stacks 2-D tensors (or 1-D rows) with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| NnError::InvalidTensor("concat_rows of nothing".into()))?;
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() > 2 || t.cols() != cols {
                return Err(mismatch("concat_rows", self.shape(first), t.shape()));
            }
            data.extend_from_slice(t.data());
        }
        let rows = data.len() / cols;
        let out = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Selects rows by index (repeats allowed) into `[idx.len(), cols]`.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(x);
        let rows = t.rows();
        let mut data = Vec::with_capacity(idx.len() * t.cols());
        for &i in idx {
            if i >= rows {
                return Err(NnError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    bound: rows,
                });
            }
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(vec![idx.len(), t.cols()], data)?;
        Ok(self.push(
            out,
            Op::GatherRows {
                x,
                idx: idx.to_vec(),
            },
        ))
    }

    /// Coordinatewise maximum over rows, `[n, d] -> [d]`. Ties go to the lowest row.
    pub fn max_rows(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let cols = t.cols();
        let mut best = t.row(0).to_vec();
        let mut argmax = vec![0; cols];
        for r in 1..t.rows() {
            for (j, &v) in t.row(r).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = r;
                }
            }
        }
        let out = Tensor::new(vec![cols], best).expect("positive cols");
        self.push(out, Op::MaxRows { x, argmax })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().copied().sum::<S>() / S::from_usize(t.len()).unwrap();
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Mean of squared elementwise differences.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(mismatch("mse_loss", p.shape(), t.shape()));
        }
        let s: S = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let out = Tensor::scalar(s / S::from_usize(p.len()).unwrap());
        Ok(self.push(out, Op::Mse(pred, target)))
    }

    /// Mean over rows of the squared L2 distance between rows.
    pub fn l2_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(mismatch("l2_loss", p.shape(), t.shape()));
        }
        let s: S = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let out = Tensor::scalar(s / S::from_usize(p.rows()).unwrap());
        Ok(self.push(out, Op::L2(pred, target)))
    }

    /// Mean cross-entropy of `logits: [n, C]` (or `[C]`) against class ids.
    pub fn cross_entropy(&mut self, logits: Var, classes: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let c = t.cols();
        if t.rows() != classes.len() {
            return Err(mismatch("cross_entropy", t.shape(), &[classes.len()]));
        }
        let mut probs = t.data().to_vec();
        let mut loss = S::zero();
        for (r, &cls) in classes.iter().enumerate() {
            if cls >= c {
                return Err(NnError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: cls,
                    bound: c,
                });
            }
            let row = t.row(r);
            let m = row.iter().copied().fold(S::neg_infinity(), S::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<S>().ln();
            loss += lse - row[cls];
            softmax_row(&mut probs[r * c..(r + 1) * c]);
        }
        let out = Tensor::scalar(loss / S::from_usize(classes.len()).unwrap());
        Ok(self.push(
            out,
            Op::CrossEntropy {
                logits,
                classes: classes.to_vec(),
                probs,
            },
        ))
    }

    /// Mean binary cross-entropy on raw logits, one label in `[0, 1]` per element.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[S]) -> Result<Var> {
        let t = self.value(logits);
        if t.len() != labels.len() {
            return Err(mismatch("bce_with_logits", t.shape(), &[labels.len()]));
        }
        let s: S = t
            .data()
            .iter()
            .zip(labels)
            .map(|(&z, &y)| z.max(S::zero()) - z * y + (S::one() + (-z.abs()).exp()).ln())
            .sum();
        let out = Tensor::scalar(s / S::from_usize(labels.len()).unwrap());
        Ok(self.push(
            out,
            Op::BceLogits {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    #[cfg(test)]
    pub(crate) fn broken_double(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x + x);
        self.push(out, Op::BrokenDouble(a))
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(NnError::NotScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lt.shape(), S::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.map(|p| (p, i)))
            .collect();
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn backprop_node(&self, i: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        let out = self.nodes[i].value.get();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                // dA = G · Bᵀ, dB = Aᵀ · G
                let bt = transpose_raw(tb.data(), k, n);
                let mut da = vec![S::zero(); m * k];
                matmul_into(g.data(), &bt, &mut da, m, n, k);
                let at = transpose_raw(ta.data(), m, k);
                let mut db = vec![S::zero(); k * n];
                matmul_into(&at, g.data(), &mut db, k, m, n);
                accumulate(grads, *a, ta.shape(), da);
                accumulate(grads, *b, tb.shape(), db);
            }
            Op::Transpose(a) => {
                let s = g.shape();
                accumulate(grads, *a, self.shape(*a), transpose_raw(g.data(), s[0], s[1]));
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(self.nodes[i].op, Op::Sub(..)) { -S::one() } else { S::one() };
                accumulate(grads, *a, self.shape(*a), g.data().to_vec());
                let tb = self.value(*b);
                let n = tb.len();
                let mut db = vec![S::zero(); n];
                for (j, &gv) in g.data().iter().enumerate() {
                    db[j % n] += gv;
                }
                if sign < S::zero() {
                    db.iter_mut().for_each(|x| *x = -*x);
                }
                accumulate(grads, *b, tb.shape(), db);
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let n = tb.len();
                let mut da = Vec::with_capacity(ta.len());
                let mut db = vec![S::zero(); n];
                for (j, (&gv, &av)) in g.data().iter().zip(ta.data()).enumerate() {
                    da.push(gv * tb.data()[j % n]);
                    db[j % n] += gv * av;
                }
                accumulate(grads, *a, ta.shape(), da);
                accumulate(grads, *b, tb.shape(), db);
            }
            Op::Scale(a, c) => {
                accumulate(grads, *a, self.shape(*a), g.data().iter().map(|&x| x * *c).collect());
            }
            Op::Softmax(a) => {
                let cols = out.cols();
                let mut dx = Vec::with_capacity(out.len());
                for r in 0..out.rows() {
                    let y = out.row(r);
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let dot: S = y.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    dx.extend(y.iter().zip(gr).map(|(&yv, &gv)| yv * (gv - dot)));
                }
                accumulate(grads, *a, self.shape(*a), dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let cols = out.cols();
                let n = S::from_usize(cols).unwrap();
                let gv = self.value(*gamma).data();
                let mut dx = Vec::with_capacity(out.len());
                let mut dgamma = vec![S::zero(); cols];
                let mut dbeta = vec![S::zero(); cols];
                for r in 0..out.rows() {
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let hr = &xhat[r * cols..(r + 1) * cols];
                    let mut sum_d = S::zero();
                    let mut sum_dh = S::zero();
                    for j in 0..cols {
                        let d = gr[j] * gv[j];
                        sum_d += d;
                        sum_dh += d * hr[j];
                        dgamma[j] += gr[j] * hr[j];
                        dbeta[j] += gr[j];
                    }
                    for j in 0..cols {
                        let d = gr[j] * gv[j];
                        dx.push(inv_std[r] / n * (n * d - sum_d - hr[j] * sum_dh));
                    }
                }
                accumulate(grads, *x, self.shape(*x), dx);
                accumulate(grads, *gamma, &[cols], dgamma);
                accumulate(grads, *beta, &[cols], dbeta);
            }
            Op::Gelu(a) => {
                let ta = self.value(*a);
                let dx = ta.data().iter().zip(g.data()).map(|(&x, &gv)| gv * gelu_parts(x).1).collect();
                accumulate(grads, *a, ta.shape(), dx);
            }
            Op::Sigmoid(a) => {
                let dx = out
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gv)| gv * y * (S::one() - y))
                    .collect();
                accumulate(grads, *a, self.shape(*a), dx);
            }
            Op::Reshape(a) => {
                accumulate(grads, *a, self.shape(*a), g.data().to_vec());
            }
            Op::SliceCols { x, start } => {
                let tx = self.value(*x);
                let (cols, len) = (tx.cols(), out.cols());
                let mut dx = vec![S::zero(); tx.len()];
                for r in 0..tx.rows() {
                    dx[r * cols + start..r * cols + start + len].copy_from_slice(&g.data()[r * len..(r + 1) * len]);
                }
                accumulate(grads, *x, tx.shape(), dx);
            }
            Op::ConcatCols(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let tp = self.value(p);
                    let c = tp.cols();
                    let mut dp = Vec::with_capacity(tp.len());
                    for r in 0..tp.rows() {
                        dp.extend_from_slice(&g.data()[r * total + offset..r * total + offset + c]);
                    }
                    offset += c;
                    accumulate(grads, p, tp.shape(), dp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let tp = self.value(p);
                    accumulate(grads, p, tp.shape(), g.data()[offset..offset + tp.len()].to_vec());
                    offset += tp.len();
                }
            }
            Op::GatherRows { x, idx } => {
                let tx = self.value(*x);
                let cols = tx.cols();
                let mut dx = vec![S::zero(); tx.len()];
                for (k, &r) in idx.iter().enumerate() {
                    for (d, &gv) in dx[r * cols..(r + 1) * cols].iter_mut().zip(&g.data()[k * cols..(k + 1) * cols]) {
                        *d += gv;
                    }
                }
                accumulate(grads, *x, tx.shape(), dx);
            }
            Op::MaxRows { x, argmax } => {
                let tx = self.value(*x);
                let cols = tx.cols();
                let mut dx = vec![S::zero(); tx.len()];
                for (j, &r) in argmax.iter().enumerate() {
                    dx[r * cols + j] += g.data()[j];
                }
                accumulate(grads, *x, tx.shape(), dx);
            }
            Op::Sum(a) => {
                let ta = self.value(*a);
                accumulate(grads, *a, ta.shape(), vec![g.item(); ta.len()]);
            }
            Op::Mean(a) => {
                let ta = self.value(*a);
                let v = g.item() / S::from_usize(ta.len()).unwrap();
                accumulate(grads, *a, ta.shape(), vec![v; ta.len()]);
            }
            Op::Mse(p, t) | Op::L2(p, t) => {
                let (tp, tt) = (self.value(*p), self.value(*t));
                let denom = match self.nodes[i].op {
                    Op::Mse(..) => tp.len(),
                    _ => tp.rows(),
                };
                let c = S::lit(2.0) * g.item() / S::from_usize(denom).unwrap();
                let dp: Vec<S> = tp.data().iter().zip(tt.data()).map(|(&a, &b)| c * (a - b)).collect();
                let dt = dp.iter().map(|&v| -v).collect();
                accumulate(grads, *p, tp.shape(), dp);
                accumulate(grads, *t, tt.shape(), dt);
            }
            Op::CrossEntropy { logits, classes, probs } => {
                let tl = self.value(*logits);
                let c = tl.cols();
                let scale = g.item() / S::from_usize(classes.len()).unwrap();
                let mut dx: Vec<S> = probs.iter().map(|&p| p * scale).collect();
                for (r, &cls) in classes.iter().enumerate() {
                    dx[r * c + cls] -= scale;
                }
                accumulate(grads, *logits, tl.shape(), dx);
            }
            Op::BceLogits { logits, labels } => {
                let tl = self.value(*logits);
                let scale = g.item() / S::from_usize(labels.len()).unwrap();
                let dx = tl
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&z, &y)| (sigmoid(z) - y) * scale)
                    .collect();
                accumulate(grads, *logits, tl.shape(), dx);
            }
            #[cfg(test)]
            Op::BrokenDouble(a) => {
                // deliberately wrong: true derivative is 2
                accumulate(grads, *a, self.shape(*a), g.data().to_vec());
            }
        }
    }
}

fn softmax_row<S: Scalar>(row: &mut [S]) {
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    let mut z = S::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in row.iter_mut() {
        *v /= z;
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], v: Var, shape: &[usize], data: Vec<S>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(data) {
                *e += d;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shape.to_vec(), data).expect("gradient matches input shape"));
        }
    }
}
