//! Tape of one forward pass and its reverse sweep.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;

use crate::error::{Error, Result};

use super::kernels::{self, LstmTrace, LstmWeights};
use super::{ParamId, ParamStore, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<S> {
    Input,
    Param(ParamId),
    Embedding {
        table: NodeId,
        ids: Vec<u32>,
        skip_pad: bool,
    },
    MaskedMean {
        x: NodeId,
        lengths: Vec<usize>,
    },
    Dense {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Conv1d {
        x: NodeId,
        filters: NodeId,
        bias: NodeId,
    },
    MaxPoolTime {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Lstm {
        x: NodeId,
        wx: NodeId,
        wh: NodeId,
        b: NodeId,
        traces: Vec<LstmTrace<S>>,
    },
    Concat {
        parts: Vec<NodeId>,
    },
    Dropout {
        x: NodeId,
        mask: Vec<S>,
    },
    Relu {
        x: NodeId,
    },
    Sigmoid {
        x: NodeId,
    },
    Softmax {
        x: NodeId,
    },
    SigmoidBce {
        logits: NodeId,
        targets: Vec<S>,
        weights: Vec<S>,
    },
    SoftmaxCe {
        logits: NodeId,
        targets: Vec<usize>,
        weights: Vec<S>,
    },
    Sum {
        x: NodeId,
    },
}

#[derive(Debug)]
struct Node<S> {
    op: Op<S>,
    // `None` for parameter nodes, whose value lives in the store.
    value: Option<Tensor<S>>,
    requires_grad: bool,
}

/// Records a forward pass. Parameters are read from the borrowed store; the
/// gradient sweep hands results back as [`Gradients`].
pub struct Graph<'p, S: Scalar> {
    params: &'p ParamStore<S>,
    nodes: Vec<Node<S>>,
}

/// Result of [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    nodes: Vec<Option<Tensor<S>>>,
    params: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of a parameter; `None` if frozen or not reached.
    pub fn param(&self, id: ParamId) -> Option<&Tensor<S>> {
        self.params.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of a node that requires gradients.
    pub fn node(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.nodes.get(id.0).and_then(Option::as_ref)
    }
}

fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

fn softplus<S: Scalar>(v: S) -> S {
    v.max(S::zero()) + (-v.abs()).exp().ln_1p()
}

fn softmax_row<S: Scalar>(row: &[S], out: &mut [S]) {
    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
    let mut z = S::zero();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(params: &'p ParamStore<S>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (Op::Param(pid), _) => &self.params.get(*pid).value,
            (_, Some(v)) => v,
            _ => unreachable!("non-parameter node without value"),
        }
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: Tensor<S>) -> NodeId {
        self.nodes.push(Node {
            op: Op::Input,
            value: Some(t),
            requires_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Input whose gradient is reported by [`Gradients::node`].
    pub fn variable(&mut self, t: Tensor<S>) -> NodeId {
        let id = self.input(t);
        self.nodes[id.0].requires_grad = true;
        id
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let p = self.params.get(id);
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: !p.frozen,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Row lookup: `ids` has `batch × len` entries; output is `B×L×D`.
    pub fn embedding(&mut self, table: NodeId, ids: &[u32], batch: usize, len: usize) -> Result<NodeId> {
        let tv = self.value(table);
        let [rows, dim] = *tv.shape() else {
            return Err(Error::Shape(format!("embedding table {:?}", tv.shape())));
        };
        if ids.len() != batch * len {
            return Err(Error::Shape(format!(
                "{} ids for a {batch}×{len} batch",
                ids.len()
            )));
        }
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            let id = id as usize;
            if id >= rows {
                return Err(Error::Config(format!("token id {id} outside table of {rows} rows")));
            }
            out.extend_from_slice(&tv.data()[id * dim..(id + 1) * dim]);
        }
        let skip_pad = match self.nodes[table.0].op {
            Op::Param(pid) => self.params.get(pid).pad_row,
            _ => false,
        };
        let value = Tensor::new([batch, len, dim], out)?;
        Ok(self.push(
            Op::Embedding {
                table,
                ids: ids.to_vec(),
                skip_pad,
            },
            value,
            &[table],
        ))
    }

    /// Mean over the first `lengths[b]` steps of `x: B×L×D`; zero for empty rows.
    pub fn masked_mean(&mut self, x: NodeId, lengths: &[usize]) -> Result<NodeId> {
        let xv = self.value(x);
        let [batch, len, dim] = *xv.shape() else {
            return Err(Error::Shape(format!("masked mean input {:?}", xv.shape())));
        };
        if lengths.len() != batch || lengths.iter().any(|&l| l > len) {
            return Err(Error::Shape(format!("lengths {lengths:?} for {batch}×{len}")));
        }
        let mut out = vec![S::zero(); batch * dim];
        for (b, &n) in lengths.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let row = &mut out[b * dim..(b + 1) * dim];
            for t in 0..n {
                kernels::axpy(S::one(), &xv.data()[(b * len + t) * dim..(b * len + t + 1) * dim], row);
            }
            let inv = S::one() / S::lit(n as f64);
            row.iter_mut().for_each(|v| *v *= inv);
        }
        let value = Tensor::new([batch, dim], out)?;
        Ok(self.push(
            Op::MaskedMean {
                x,
                lengths: lengths.to_vec(),
            },
            value,
            &[x],
        ))
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let value = kernels::dense_forward(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(Op::Dense { x, w, b }, value, &[x, w, b]))
    }

    pub fn conv1d(&mut self, x: NodeId, filters: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = kernels::conv1d_forward(self.value(x), self.value(filters), self.value(bias))?;
        Ok(self.push(Op::Conv1d { x, filters, bias }, value, &[x, filters, bias]))
    }

    pub fn max_pool_time(&mut self, x: NodeId) -> Result<NodeId> {
        let (value, argmax) = kernels::max_pool_with_argmax(self.value(x))?;
        Ok(self.push(Op::MaxPoolTime { x, argmax }, value, &[x]))
    }

    /// One LSTM direction returning the final hidden state (`B×H`).
    pub fn lstm(
        &mut self,
        x: NodeId,
        wx: NodeId,
        wh: NodeId,
        b: NodeId,
        lengths: &[usize],
        reverse: bool,
    ) -> Result<NodeId> {
        let w = LstmWeights {
            wx: self.value(wx),
            wh: self.value(wh),
            b: self.value(b),
        };
        let (value, traces) = kernels::lstm_run(self.value(x), w, lengths, reverse)?;
        Ok(self.push(Op::Lstm { x, wx, wh, b, traces }, value, &[x, wx, wh, b]))
    }

    /// Concatenates rank-2 nodes along the feature axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::Shape("concat of nothing".into()));
        };
        let batch = self.value(first).shape()[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            match *self.value(p).shape() {
                [b, w] if b == batch => widths.push(w),
                ref s => return Err(Error::Shape(format!("concat part {s:?}, batch {batch}"))),
            }
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(batch * total);
        for b in 0..batch {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[b * w..(b + 1) * w]);
            }
        }
        let value = Tensor::new([batch, total], out)?;
        Ok(self.push(Op::Concat { parts: parts.to_vec() }, value, parts))
    }

    /// Inverted dropout: kept units are scaled by `1/(1−rate)`. With
    /// `train == false` or `rate == 0` the node is the identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: NodeId, rate: f64, train: bool, rng: &mut R) -> NodeId {
        let xv = self.value(x);
        let mask: Vec<S> = if train && rate > 0.0 {
            let scale = S::lit(1.0 / (1.0 - rate));
            (0..xv.len())
                .map(|_| if rng.random::<f64>() < rate { S::zero() } else { scale })
                .collect()
        } else {
            vec![S::one(); xv.len()]
        };
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        self.push(Op::Dropout { x, mask }, value, &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(S::zero()));
        self.push(Op::Relu { x }, value, &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid { x }, value, &[x])
    }

    /// Row-wise softmax of a rank-2 node.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let [_, k] = *xv.shape() else {
            return Err(Error::Shape(format!("softmax input {:?}", xv.shape())));
        };
        let mut out = vec![S::zero(); xv.len()];
        for (row, o) in xv.data().chunks_exact(k).zip(out.chunks_exact_mut(k)) {
            softmax_row(row, o);
        }
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(Op::Softmax { x }, value, &[x]))
    }

    /// Mean over the batch of `w_b · BCE(σ(z_b), y_b)` for logits `B×1`.
    pub fn sigmoid_bce(&mut self, logits: NodeId, targets: &[S], weights: Option<&[S]>) -> Result<NodeId> {
        let zv = self.value(logits);
        let batch = zv.shape()[0];
        if zv.len() != batch || targets.len() != batch {
            return Err(Error::Shape(format!(
                "binary loss: logits {:?}, {} targets",
                zv.shape(),
                targets.len()
            )));
        }
        let weights = weights.map_or_else(|| vec![S::one(); batch], <[S]>::to_vec);
        if weights.len() != batch {
            return Err(Error::Shape("binary loss: weight count".into()));
        }
        let mut total = S::zero();
        for ((&z, &y), &w) in zv.data().iter().zip(targets).zip(&weights) {
            total += w * (softplus(z) - y * z);
        }
        let value = Tensor::scalar(total / S::lit(batch as f64));
        Ok(self.push(
            Op::SigmoidBce {
                logits,
                targets: targets.to_vec(),
                weights,
            },
            value,
            &[logits],
        ))
    }

    /// Mean over the batch of `w_b · −log softmax(z_b)[t_b]` for logits `B×K`.
    pub fn softmax_ce(&mut self, logits: NodeId, targets: &[usize], weights: Option<&[S]>) -> Result<NodeId> {
        let zv = self.value(logits);
        let [batch, k] = *zv.shape() else {
            return Err(Error::Shape(format!("categorical loss logits {:?}", zv.shape())));
        };
        if targets.len() != batch || targets.iter().any(|&t| t >= k) {
            return Err(Error::Shape(format!(
                "categorical loss: {} targets for {batch}×{k}",
                targets.len()
            )));
        }
        let weights = weights.map_or_else(|| vec![S::one(); batch], <[S]>::to_vec);
        if weights.len() != batch {
            return Err(Error::Shape("categorical loss: weight count".into()));
        }
        let mut total = S::zero();
        for (b, row) in zv.data().chunks_exact(k).enumerate() {
            let m = row.iter().copied().fold(S::neg_infinity(), S::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<S>().ln();
            total += weights[b] * (lse - row[targets[b]]);
        }
        let value = Tensor::scalar(total / S::lit(batch as f64));
        Ok(self.push(
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                weights,
            },
            value,
            &[logits],
        ))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(Op::Sum { x }, value, &[x])
    }

    /// Hash of every piecewise decision taken by the forward pass: ReLU
    /// input signs and max-pool argmax positions. Two evaluations with equal
    /// signatures lie on the same smooth piece.
    pub fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu { x } => {
                    for v in self.value(*x).data() {
                        (*v > S::zero()).hash(&mut h);
                    }
                }
                Op::MaxPoolTime { argmax, .. } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(self, loss: NodeId) -> Result<Gradients<S>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward from non-scalar node {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape().to_vec(), S::one()));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let contributions = self.local_grads(idx, &dy);
            grads[idx] = Some(dy);
            for (target, g) in contributions {
                if !self.nodes[target.0].requires_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }

        let mut params: Vec<Option<Tensor<S>>> = (0..self.params.len()).map(|_| None).collect();
        for (node, grad) in self.nodes.iter().zip(&grads) {
            if let (Op::Param(pid), Some(g)) = (&node.op, grad) {
                match &mut params[pid.0] {
                    Some(acc) => acc.add_assign(g),
                    slot @ None => *slot = Some(g.clone()),
                }
            }
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Gradients of node `idx`'s inputs given the gradient of its output.
    fn local_grads(&self, idx: usize, dy: &Tensor<S>) -> Vec<(NodeId, Tensor<S>)> {
        let node = &self.nodes[idx];
        let out = node.value.as_ref();
        match &node.op {
            Op::Input | Op::Param(_) => Vec::new(),
            Op::Embedding { table, ids, skip_pad } => {
                let tv = self.value(*table);
                let dim = tv.shape()[1];
                let mut g = Tensor::zeros(tv.shape().to_vec());
                for (k, &id) in ids.iter().enumerate() {
                    if *skip_pad && id == 0 {
                        continue;
                    }
                    let id = id as usize;
                    kernels::axpy(
                        S::one(),
                        &dy.data()[k * dim..(k + 1) * dim],
                        &mut g.data_mut()[id * dim..(id + 1) * dim],
                    );
                }
                vec![(*table, g)]
            }
            Op::MaskedMean { x, lengths } => {
                let xv = self.value(*x);
                let (len, dim) = (xv.shape()[1], xv.shape()[2]);
                let mut g = Tensor::zeros(xv.shape().to_vec());
                for (b, &n) in lengths.iter().enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let inv = S::one() / S::lit(n as f64);
                    let src = &dy.data()[b * dim..(b + 1) * dim];
                    for t in 0..n {
                        let start = (b * len + t) * dim;
                        kernels::axpy(inv, src, &mut g.data_mut()[start..start + dim]);
                    }
                }
                vec![(*x, g)]
            }
            Op::Dense { x, w, b } => {
                let (dx, dw, db) = kernels::dense_backward(self.value(*x), self.value(*w), dy);
                vec![(*x, dx), (*w, dw), (*b, db)]
            }
            Op::Conv1d { x, filters, bias } => {
                let (dx, df, db) = kernels::conv1d_backward(
                    self.value(*x),
                    self.value(*filters),
                    dy,
                    self.needs(*x),
                );
                let mut v = vec![(*filters, df), (*bias, db)];
                if let Some(dx) = dx {
                    v.push((*x, dx));
                }
                v
            }
            Op::MaxPoolTime { x, argmax } => {
                let xv = self.value(*x);
                let (steps, nf) = (xv.shape()[1], xv.shape()[2]);
                let mut g = Tensor::zeros(xv.shape().to_vec());
                for (k, (&t, &d)) in argmax.iter().zip(dy.data()).enumerate() {
                    let (b, f) = (k / nf, k % nf);
                    g.data_mut()[(b * steps + t) * nf + f] += d;
                }
                vec![(*x, g)]
            }
            Op::Lstm { x, wx, wh, b, traces } => {
                let w = LstmWeights {
                    wx: self.value(*wx),
                    wh: self.value(*wh),
                    b: self.value(*b),
                };
                let g = kernels::lstm_backward(self.value(*x), w, traces, dy, self.needs(*x));
                let mut v = vec![(*wx, g.dwx), (*wh, g.dwh), (*b, g.db)];
                if let Some(dx) = g.dx {
                    v.push((*x, dx));
                }
                v
            }
            Op::Concat { parts } => {
                let batch = dy.shape()[0];
                let total = dy.shape()[1];
                let mut offset = 0;
                let mut v = Vec::with_capacity(parts.len());
                for &p in parts {
                    let w = self.value(p).shape()[1];
                    let mut g = Vec::with_capacity(batch * w);
                    for b in 0..batch {
                        g.extend_from_slice(&dy.data()[b * total + offset..b * total + offset + w]);
                    }
                    offset += w;
                    v.push((p, Tensor::new([batch, w], g).expect("shape")));
                }
                v
            }
            Op::Dropout { x, mask } => {
                let data = dy.data().iter().zip(mask).map(|(&d, &m)| d * m).collect();
                vec![(*x, Tensor::new(dy.shape().to_vec(), data).expect("shape"))]
            }
            Op::Relu { x } => {
                let xv = self.value(*x);
                let data = dy
                    .data()
                    .iter()
                    .zip(xv.data())
                    .map(|(&d, &v)| if v > S::zero() { d } else { S::zero() })
                    .collect();
                vec![(*x, Tensor::new(dy.shape().to_vec(), data).expect("shape"))]
            }
            Op::Sigmoid { x } => {
                let y = out.expect("value");
                let data = dy
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&d, &s)| d * s * (S::one() - s))
                    .collect();
                vec![(*x, Tensor::new(dy.shape().to_vec(), data).expect("shape"))]
            }
            Op::Softmax { x } => {
                let y = out.expect("value");
                let k = y.shape()[1];
                let mut g = vec![S::zero(); y.len()];
                for ((yr, dr), gr) in y
                    .data()
                    .chunks_exact(k)
                    .zip(dy.data().chunks_exact(k))
                    .zip(g.chunks_exact_mut(k))
                {
                    let inner = kernels::dot(yr, dr);
                    for ((gv, &yv), &dv) in gr.iter_mut().zip(yr).zip(dr) {
                        *gv = yv * (dv - inner);
                    }
                }
                vec![(*x, Tensor::new(y.shape().to_vec(), g).expect("shape"))]
            }
            Op::SigmoidBce {
                logits,
                targets,
                weights,
            } => {
                let zv = self.value(*logits);
                let scale = dy.data()[0] / S::lit(targets.len() as f64);
                let data = zv
                    .data()
                    .iter()
                    .zip(targets)
                    .zip(weights)
                    .map(|((&z, &y), &w)| scale * w * (sigmoid(z) - y))
                    .collect();
                vec![(*logits, Tensor::new(zv.shape().to_vec(), data).expect("shape"))]
            }
            Op::SoftmaxCe {
                logits,
                targets,
                weights,
            } => {
                let zv = self.value(*logits);
                let k = zv.shape()[1];
                let scale = dy.data()[0] / S::lit(targets.len() as f64);
                let mut g = vec![S::zero(); zv.len()];
                for (b, (row, gr)) in zv.data().chunks_exact(k).zip(g.chunks_exact_mut(k)).enumerate() {
                    softmax_row(row, gr);
                    gr[targets[b]] -= S::one();
                    let s = scale * weights[b];
                    gr.iter_mut().for_each(|v| *v *= s);
                }
                vec![(*logits, Tensor::new(zv.shape().to_vec(), g).expect("shape"))]
            }
            Op::Sum { x } => {
                let xv = self.value(*x);
                vec![(*x, Tensor::full(xv.shape().to_vec(), dy.data()[0]))]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::Parameter;

    #[test]
    fn sum_of_identity_dense_has_unit_input_gradient() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add(Parameter::new("w", Tensor::from_f64([2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap()));
        let b = store.add(Parameter::new("b", Tensor::zeros([2])));
        let mut g = Graph::new(&store);
        let x = g.variable(Tensor::from_f64([3, 2], &[1.0, -2.0, 0.5, 4.0, 3.0, 0.0]).unwrap());
        let (wn, bn) = (g.param(w), g.param(b));
        let y = g.dense(x, wn, bn).unwrap();
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert!(grads.node(x).unwrap().data().iter().all(|&v| v == 1.0));
        assert_eq!(grads.param(b).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn max_pool_gradient_goes_to_first_argmax() {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let x = g.variable(Tensor::from_f64([1, 3, 2], &[1.0, 5.0, 3.0, 5.0, 3.0, 0.0]).unwrap());
        let p = g.max_pool_time(x).unwrap();
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.node(x).unwrap().data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn frozen_parameters_get_no_gradient() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add(Parameter::new("w", Tensor::full([2, 1], 1.0)).frozen(true));
        let b = store.add(Parameter::new("b", Tensor::zeros([1])));
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::full([1, 2], 2.0));
        let (wn, bn) = (g.param(w), g.param(b));
        let y = g.dense(x, wn, bn).unwrap();
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert!(grads.param(w).is_none());
        assert_eq!(grads.param(b).unwrap().data(), &[1.0]);
    }

    #[test]
    fn embedding_pad_row_receives_nothing() {
        let mut store = ParamStore::<f64>::new();
        let table = store.add(Parameter::new("emb", Tensor::full([3, 2], 0.5)).with_pad_row());
        let mut g = Graph::new(&store);
        let t = g.param(table);
        let e = g.embedding(t, &[2, 0, 2, 1], 2, 2).unwrap();
        let s = g.sum(e);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.param(table).unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn dropout_modes() {
        use rand::SeedableRng;
        let store = ParamStore::<f64>::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::full([4, 50], 1.0));
        let eval = g.dropout(x, 0.2, false, &mut rng);
        assert!(g.value(eval).data().iter().all(|&v| v == 1.0));
        let none = g.dropout(x, 0.0, true, &mut rng);
        assert!(g.value(none).data().iter().all(|&v| v == 1.0));
        let train = g.dropout(x, 0.2, true, &mut rng);
        let vals = g.value(train).data();
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-12));
        assert!(vals.contains(&0.0));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let store = ParamStore::<f32>::new();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::from_f64([2, 3], &[1.0, 2.0, 3.0, -50.0, 80.0, 0.0]).unwrap());
        let s = g.softmax(x).unwrap();
        for row in g.value(s).data().chunks(3) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
        let sg = g.sigmoid(x);
        assert!(g.value(sg).data().iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}
