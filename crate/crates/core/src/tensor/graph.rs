//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. Nodes are
//! created in topological order, so [`Graph::backward`] only has to walk the
//! tape once in reverse.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Floor applied to the gold-class probability before taking its log.
pub const LOG_CLAMP_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    Scale(NodeId, T),
    Transpose(NodeId),
    Relu(NodeId),
    Softmax(NodeId),
    /// Keeps the normalized input and the per-row inverse standard deviation.
    LayerNorm {
        input: NodeId,
        normalized: Matrix<T>,
        inv_std: Vec<T>,
    },
    SliceCols {
        input: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    GatherRows {
        table: NodeId,
        indices: Vec<usize>,
    },
    /// `clamped` marks a probability that fell below the floor; its gradient is zero.
    CrossEntropy {
        probs: NodeId,
        row: usize,
        label: usize,
        clamped: bool,
    },
    Sum(NodeId),
}

/// One entry of the tape: a forward value, the rule that produced it and,
/// after [`Graph::backward`], its gradient.
#[derive(Clone, Debug)]
pub struct ComputationNode<T> {
    value: Matrix<T>,
    grad: Option<Matrix<T>>,
    op: Op<T>,
}

impl<T: Scalar> ComputationNode<T> {
    pub fn value(&self) -> &Matrix<T> {
        &self.value
    }

    pub fn grad(&self) -> Option<&Matrix<T>> {
        self.grad.as_ref()
    }

    pub fn parents(&self) -> Vec<NodeId> {
        match &self.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) | Op::MulRow(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _) | Op::Transpose(a) | Op::Relu(a) | Op::Softmax(a) | Op::Sum(a) => vec![*a],
            Op::LayerNorm { input, .. } | Op::SliceCols { input, .. } => vec![*input],
            Op::ConcatCols(parts) => parts.clone(),
            Op::GatherRows { table, .. } => vec![*table],
            Op::CrossEntropy { probs, .. } => vec![*probs],
        }
    }

    /// Name of the backward rule.
    pub fn rule(&self) -> &'static str {
        match &self.op {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Scale(..) => "scale",
            Op::Transpose(..) => "transpose",
            Op::Relu(..) => "relu",
            Op::Softmax(..) => "softmax_rows",
            Op::LayerNorm { .. } => "layer_norm_rows",
            Op::SliceCols { .. } => "slice_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::GatherRows { .. } => "gather_rows",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Sum(..) => "sum",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<ComputationNode<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &ComputationNode<T> {
        &self.nodes[id.0]
    }

    pub fn value(&self, id: NodeId) -> &Matrix<T> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward root with respect to `id`.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix<T>> {
        self.nodes[id.0].grad.as_ref()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> NodeId {
        self.nodes.push(ComputationNode { value, grad: None, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix<T>) -> Result<NodeId> {
        let value = value.check_finite("leaf")?;
        Ok(self.push(value, Op::Leaf))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).mul(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Broadcast bias add: `b` is `1 x cols`.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add_row(self.value(b))?;
        Ok(self.push(v, Op::AddRow(a, b)))
    }

    /// Broadcast elementwise scale by a `1 x cols` row.
    pub fn mul_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).mul_row(self.value(b))?;
        Ok(self.push(v, Op::MulRow(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, k: T) -> Result<NodeId> {
        let v = self.value(a).scale(k)?;
        Ok(self.push(v, Op::Scale(a, k)))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).transpose();
        Ok(self.push(v, Op::Transpose(a)))
    }

    /// ReLU. The derivative at exactly zero is taken as zero.
    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).relu();
        Ok(self.push(v, Op::Relu(a)))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).softmax_rows()?;
        Ok(self.push(v, Op::Softmax(a)))
    }

    /// Normalizes every row to zero mean and unit variance (no affine part).
    pub fn layer_norm_rows(&mut self, a: NodeId, eps: T) -> Result<NodeId> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        if cols == 0 {
            return Err(Error::input("layer norm over zero columns"));
        }
        let n = T::of_usize(cols);
        let mut normalized = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let s = T::one() / (var + eps).sqrt();
            for (o, &v) in normalized.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * s;
            }
            inv_std.push(s);
        }
        let normalized = normalized.check_finite("layer_norm_rows")?;
        Ok(self.push(
            normalized.clone(),
            Op::LayerNorm {
                input: a,
                normalized,
                inv_std,
            },
        ))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let x = self.value(a);
        if start + len > x.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                left: x.shape(),
                right: (start, len),
            });
        }
        let mut out = Matrix::zeros(x.rows(), len);
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        Ok(self.push(out, Op::SliceCols { input: a, start }))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or_else(|| Error::input("concat_cols of nothing"))?;
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    left: self.value(*first).shape(),
                    right: v.shape(),
                });
            }
            cols += v.cols();
        }
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Embedding lookup: row `i` of the output is row `indices[i]` of `table`.
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let t = self.value(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::input(format!(
                "row index {bad} out of range for table with {} rows",
                t.rows()
            )));
        }
        let mut out = Matrix::zeros(indices.len(), t.cols());
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(i));
        }
        Ok(self.push(
            out,
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
        ))
    }

    /// `-ln p[row][label]` for a probability matrix, clamping the probability
    /// at [`LOG_CLAMP_FLOOR`].
    pub fn cross_entropy(&mut self, probs: NodeId, row: usize, label: usize) -> Result<NodeId> {
        let p = self.value(probs);
        if row >= p.rows() || label >= p.cols() {
            return Err(Error::input(format!(
                "cross entropy target ({row}, {label}) outside {:?}",
                p.shape()
            )));
        }
        let floor = T::of(LOG_CLAMP_FLOOR);
        let raw = p.get(row, label);
        let clamped = raw < floor;
        if clamped {
            log::warn!("cross entropy: p[{label}] = {raw} clamped to {LOG_CLAMP_FLOOR}");
        }
        let loss = -(raw.max(floor)).ln();
        Ok(self.push(
            Matrix::scalar(loss),
            Op::CrossEntropy {
                probs,
                row,
                label,
                clamped,
            },
        ))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).sum();
        let v = Matrix::scalar(v).check_finite("sum")?;
        Ok(self.push(v, Op::Sum(a)))
    }

    /// Back-propagates from a 1x1 root. Every node created up to and
    /// including `root` ends up with a gradient (zero if unreachable).
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::input(format!(
                "backward root must be 1x1, got {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Matrix<T>> = self.nodes[..=root.0]
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[root.0] = Matrix::scalar(T::one());

        for i in (0..=root.0).rev() {
            let g = std::mem::replace(&mut grads[i], Matrix::zeros(0, 0));
            if g.data().iter().all(|&x| x == T::zero()) {
                grads[i] = g;
                continue;
            }
            self.propagate(i, &g, &mut grads)?;
            grads[i] = g;
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            node.grad = Some(g);
        }
        for node in self.nodes.iter_mut().skip(root.0 + 1) {
            node.grad = None;
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Matrix<T>, grads: &mut [Matrix<T>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let ga = g.matmul(&bv.transpose())?;
                let gb = av.transpose().matmul(g)?;
                grads[a.0].add_assign(&ga);
                grads[b.0].add_assign(&gb);
            }
            Op::Add(a, b) => {
                grads[a.0].add_assign(g);
                grads[b.0].add_assign(g);
            }
            Op::Mul(a, b) => {
                let ga = g.mul(self.value(*b))?;
                let gb = g.mul(self.value(*a))?;
                grads[a.0].add_assign(&ga);
                grads[b.0].add_assign(&gb);
            }
            Op::AddRow(a, b) => {
                grads[a.0].add_assign(g);
                let gb = column_sums(g);
                grads[b.0].add_assign(&gb);
            }
            Op::MulRow(a, b) => {
                let ga = g.mul_row(self.value(*b))?;
                grads[a.0].add_assign(&ga);
                let gb = column_sums(&g.mul(self.value(*a))?);
                grads[b.0].add_assign(&gb);
            }
            Op::Scale(a, k) => {
                let ga = g.scale(*k)?;
                grads[a.0].add_assign(&ga);
            }
            Op::Transpose(a) => {
                grads[a.0].add_assign(&g.transpose());
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut ga = g.clone();
                for (o, &v) in ga.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *o = T::zero();
                    }
                }
                grads[a.0].add_assign(&ga);
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let mut ga = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let dot: T = y.row(r).iter().zip(g.row(r)).map(|(&p, &d)| p * d).sum();
                    for ((o, &p), &d) in ga.row_mut(r).iter_mut().zip(y.row(r)).zip(g.row(r)) {
                        *o = p * (d - dot);
                    }
                }
                grads[a.0].add_assign(&ga);
            }
            Op::LayerNorm {
                input,
                normalized,
                inv_std,
            } => {
                let (rows, cols) = normalized.shape();
                let n = T::of_usize(cols);
                let mut ga = Matrix::zeros(rows, cols);
                for (r, &inv) in inv_std.iter().enumerate() {
                    let xh = normalized.row(r);
                    let dy = g.row(r);
                    let mean_dy = dy.iter().copied().sum::<T>() / n;
                    let mean_dy_xh = dy.iter().zip(xh).map(|(&d, &x)| d * x).sum::<T>() / n;
                    for ((o, &d), &x) in ga.row_mut(r).iter_mut().zip(dy).zip(xh) {
                        *o = inv * (d - mean_dy - x * mean_dy_xh);
                    }
                }
                grads[input.0].add_assign(&ga);
            }
            Op::SliceCols { input, start } => {
                let target = &mut grads[input.0];
                for r in 0..g.rows() {
                    let dst = &mut target.row_mut(r)[*start..*start + g.cols()];
                    for (o, &d) in dst.iter_mut().zip(g.row(r)) {
                        *o += d;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let width = self.value(*p).cols();
                    let target = &mut grads[p.0];
                    for r in 0..g.rows() {
                        for (o, &d) in target.row_mut(r).iter_mut().zip(&g.row(r)[offset..offset + width]) {
                            *o += d;
                        }
                    }
                    offset += width;
                }
            }
            Op::GatherRows { table, indices } => {
                let target = &mut grads[table.0];
                for (r, &idx) in indices.iter().enumerate() {
                    for (o, &d) in target.row_mut(idx).iter_mut().zip(g.row(r)) {
                        *o += d;
                    }
                }
            }
            Op::CrossEntropy {
                probs,
                row,
                label,
                clamped,
            } => {
                if !clamped {
                    let p = self.value(*probs).get(*row, *label);
                    let d = -g.item() / p;
                    let target = &mut grads[probs.0];
                    let cur = target.get(*row, *label);
                    target.set(*row, *label, cur + d);
                }
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                grads[a.0].add_assign(&Matrix::filled(r, c, g.item()));
            }
        }
        Ok(())
    }
}

fn column_sums<T: Scalar>(g: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, &d) in out.data_mut().iter_mut().zip(g.row(r)) {
            *o += d;
        }
    }
    out
}
