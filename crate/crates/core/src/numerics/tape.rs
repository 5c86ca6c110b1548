//! Reverse-mode automatic differentiation over [`Tensor`] primitives.
//!
//! A [`Tape`] borrows the parameter tensors and records every operation in
//! creation order, which is already a topological order. [`Tape::backward`]
//! walks it in reverse and returns one gradient per parameter.

use super::tensor::{self, gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(usize),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Concat(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    SliceCols(NodeId, usize),
    Gather(NodeId, Vec<usize>),
    SumCols(NodeId),
    Select(NodeId, NodeId, Vec<bool>),
    NllSum(NodeId, Vec<Option<usize>>),
}

struct Node {
    op: Op,
    /// `None` for parameters, whose values live in the borrowed slice.
    value: Option<Tensor>,
    requires_grad: bool,
}

pub struct Tape<'p> {
    params: &'p [Tensor],
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Tensor]) -> Tape<'p> {
        Tape { params, nodes: Vec::with_capacity(1024) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(k)) => &self.params[*k],
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value: Some(value), requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].requires_grad)
    }

    pub fn param(&mut self, index: usize) -> NodeId {
        assert!(index < self.params.len(), "parameter {index} out of range");
        self.nodes.push(Node { op: Op::Param(index), value: None, requires_grad: true });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), v, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Add(a, b), v, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::mul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Mul(a, b), v, rg))
    }

    pub fn mul_col(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::mul_col(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MulCol(a, b), v, rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let v = tensor::scale(self.value(a), factor)?;
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Scale(a, factor), v, rg))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = tensor::tanh(self.value(a));
        let rg = self.rg(&[a]);
        self.push(Op::Tanh(a), v, rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = tensor::sigmoid(self.value(a));
        let rg = self.rg(&[a]);
        self.push(Op::Sigmoid(a), v, rg)
    }

    pub fn softmax(&mut self, a: NodeId, mask: Option<&Tensor>) -> Result<NodeId> {
        let v = tensor::softmax(self.value(a), mask)?;
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Softmax(a), v, rg))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::concat_cols(&values)?;
        let rg = self.rg(parts);
        Ok(self.push(Op::Concat(parts.to_vec()), v, rg))
    }

    /// Vertical concatenation of same-width nodes.
    pub fn stack_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = tensor::stack_rows(&values)?;
        let rg = self.rg(parts);
        Ok(self.push(Op::StackRows(parts.to_vec()), v, rg))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let v = tensor::slice_cols(self.value(a), start, end)?;
        let rg = self.rg(&[a]);
        Ok(self.push(Op::SliceCols(a, start), v, rg))
    }

    pub fn gather(&mut self, a: NodeId, indices: &[usize]) -> Result<NodeId> {
        let v = tensor::gather_rows(self.value(a), indices)?;
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Gather(a, indices.to_vec()), v, rg))
    }

    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let v = tensor::sum_cols(self.value(a));
        let rg = self.rg(&[a]);
        self.push(Op::SumCols(a), v, rg)
    }

    pub fn select(&mut self, new: NodeId, old: NodeId, keep: &[bool]) -> Result<NodeId> {
        let v = tensor::select_rows(self.value(new), self.value(old), keep)?;
        let rg = self.rg(&[new, old]);
        Ok(self.push(Op::Select(new, old, keep.to_vec()), v, rg))
    }

    /// Summed NLL of `targets` (one per row, `None` to skip) as a 1×1 node.
    pub fn nll_sum(&mut self, logits: NodeId, targets: &[Option<usize>]) -> Result<NodeId> {
        let v = tensor::nll_sum(self.value(logits), targets)?;
        let rg = self.rg(&[logits]);
        Ok(self.push(Op::NllSum(logits, targets.to_vec()), Tensor::scalar(v), rg))
    }

    /// Gradients of a one-element `loss` with respect to every parameter.
    /// Parameters that do not reach the loss get zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<Tensor>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut param_grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(k) => accumulate(&mut param_grads[*k], &g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                    if self.nodes[a.0].requires_grad {
                        let ga = self.slot(&mut grads, *a);
                        // dA += dC · Bᵀ
                        gemm(m, n, k, g.data(), (n as isize, 1), bv.data(), (1, n as isize), 1.0, ga.data_mut());
                    }
                    if self.nodes[b.0].requires_grad {
                        let gb = self.slot(&mut grads, *b);
                        // dB += Aᵀ · dC
                        gemm(k, m, n, av.data(), (1, k as isize), g.data(), (n as isize, 1), 1.0, gb.data_mut());
                    }
                }
                Op::Add(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        accumulate(self.slot(&mut grads, *a), &g);
                    }
                    if self.nodes[b.0].requires_grad {
                        let same = self.value(*b).shape() == g.shape();
                        let gb = self.slot(&mut grads, *b);
                        if same {
                            accumulate(gb, &g);
                        } else {
                            let c = g.cols();
                            let dst = gb.data_mut();
                            for (idx, v) in g.data().iter().enumerate() {
                                dst[idx % c] += v;
                            }
                        }
                    }
                }
                Op::Mul(a, b) => {
                    for (x, y) in [(*a, *b), (*b, *a)] {
                        if self.nodes[x.0].requires_grad {
                            let other = self.value(y).data();
                            let dst = self.slot(&mut grads, x).data_mut();
                            for ((d, gv), o) in dst.iter_mut().zip(g.data()).zip(other) {
                                *d += gv * o;
                            }
                        }
                    }
                }
                Op::MulCol(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let c = av.cols();
                    if self.nodes[a.0].requires_grad {
                        let dst = self.slot(&mut grads, *a).data_mut();
                        for (idx, (d, gv)) in dst.iter_mut().zip(g.data()).enumerate() {
                            *d += gv * bv.data()[idx / c];
                        }
                    }
                    if self.nodes[b.0].requires_grad {
                        let dst = self.slot(&mut grads, *b).data_mut();
                        for (idx, (gv, x)) in g.data().iter().zip(av.data()).enumerate() {
                            dst[idx / c] += gv * x;
                        }
                    }
                }
                Op::Scale(a, f) => {
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for (d, gv) in dst.iter_mut().zip(g.data()) {
                        *d += gv * f;
                    }
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap().data();
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for ((d, gv), y) in dst.iter_mut().zip(g.data()).zip(y) {
                        *d += gv * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap().data();
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for ((d, gv), y) in dst.iter_mut().zip(g.data()).zip(y) {
                        *d += gv * y * (1.0 - y);
                    }
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().unwrap();
                    let c = y.cols();
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            dst[r * c + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
                Op::Concat(parts) => {
                    let total = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        if self.nodes[p.0].requires_grad {
                            let dst = self.slot(&mut grads, *p).data_mut();
                            for r in 0..g.rows() {
                                let src = &g.data()[r * total + offset..r * total + offset + w];
                                for (d, s) in dst[r * w..(r + 1) * w].iter_mut().zip(src) {
                                    *d += s;
                                }
                            }
                        }
                        offset += w;
                    }
                }
                Op::StackRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).numel();
                        if self.nodes[p.0].requires_grad {
                            accumulate_slice(self.slot(&mut grads, *p), &g.data()[offset..offset + n]);
                        }
                        offset += n;
                    }
                }
                Op::SliceCols(a, start) => {
                    let c = self.value(*a).cols();
                    let w = g.cols();
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for r in 0..g.rows() {
                        for (d, s) in dst[r * c + start..r * c + start + w].iter_mut().zip(g.row_slice(r)) {
                            *d += s;
                        }
                    }
                }
                Op::Gather(a, indices) => {
                    let c = g.cols();
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for (r, &src) in indices.iter().enumerate() {
                        for (d, s) in dst[src * c..(src + 1) * c].iter_mut().zip(g.row_slice(r)) {
                            *d += s;
                        }
                    }
                }
                Op::SumCols(a) => {
                    let c = self.value(*a).cols();
                    let dst = self.slot(&mut grads, *a).data_mut();
                    for (idx, d) in dst.iter_mut().enumerate() {
                        *d += g.data()[idx / c];
                    }
                }
                Op::Select(new, old, keep) => {
                    let c = g.cols();
                    for (x, want) in [(*new, true), (*old, false)] {
                        if self.nodes[x.0].requires_grad {
                            let dst = self.slot(&mut grads, x).data_mut();
                            for (r, &k) in keep.iter().enumerate() {
                                if k == want {
                                    for (d, s) in dst[r * c..(r + 1) * c].iter_mut().zip(g.row_slice(r)) {
                                        *d += s;
                                    }
                                }
                            }
                        }
                    }
                }
                Op::NllSum(logits, targets) => {
                    let scale = g.data()[0];
                    let lv = self.value(*logits);
                    let probs = tensor::softmax(lv, None)?;
                    let c = lv.cols();
                    let dst = self.slot(&mut grads, *logits).data_mut();
                    for (r, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        for j in 0..c {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            dst[r * c + j] += scale * (probs.get(r, j) - onehot);
                        }
                    }
                }
            }
        }
        Ok(param_grads)
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Tensor>], id: NodeId) -> &'g mut Tensor {
        grads[id.0].get_or_insert_with(|| Tensor::zeros(self.value(id).shape()))
    }
}

fn accumulate(dst: &mut Tensor, src: &Tensor) {
    accumulate_slice(dst, src.data());
}

fn accumulate_slice(dst: &mut Tensor, src: &[f64]) {
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += s;
    }
}
