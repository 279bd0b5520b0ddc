//! Dynamic reverse-mode tape over dense `f64` tensors.
//!
//! Nodes are appended in construction order, so the tape is topologically
//! sorted by construction: every parent id is smaller than its child id.
//! Builder methods evaluate the forward rule eagerly; [`Tape::evaluate`]
//! replays the same rules after leaf values have been replaced.

use std::collections::HashMap;
use std::f64::consts::PI;

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("node {node}: {op} cannot combine shapes {shapes:?}")]
    Shape {
        node: NodeId,
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },
    #[error("node {node}: value length {len} does not match shape {shape:?}")]
    Length {
        node: NodeId,
        len: usize,
        shape: Vec<usize>,
    },
    #[error("loss node {node} is not scalar (shape {shape:?})")]
    NonScalarLoss { node: NodeId, shape: Vec<usize> },
    #[error("NaN gradient produced at node {node}")]
    NanGradient { node: NodeId },
    #[error("node {node} is not a leaf")]
    NotLeaf { node: NodeId },
    #[error("unknown node {node}")]
    UnknownNode { node: NodeId },
}

pub type Result<T> = std::result::Result<T, TapeError>;

/// Forward/backward rule attached to a node.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    Leaf,
    MatMul,
    /// Elementwise add. The right operand may also be a bias row (`[q]` or
    /// `[1, q]`) broadcast over the rows of a `[p, q]` left operand.
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    Shift(f64),
    Relu,
    Gelu,
    Sigmoid,
    Softmax { axis: usize },
    Sqrt,
    Square,
    Sin,
    Cos,
    Powf(f64),
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    Mean { axis: usize },
    Sum { axis: usize },
    /// Maximum along an axis; the gradient goes to the lowest argmax index.
    HardMax { axis: usize },
    Broadcast,
    Transpose,
}

impl OpKind {
    fn name(&self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Scale(_) => "scale",
            OpKind::Shift(_) => "shift",
            OpKind::Relu => "relu",
            OpKind::Gelu => "gelu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Softmax { .. } => "softmax",
            OpKind::Sqrt => "sqrt",
            OpKind::Square => "square",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Powf(_) => "powf",
            OpKind::Concat { .. } => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::Mean { .. } => "mean",
            OpKind::Sum { .. } => "sum",
            OpKind::HardMax { .. } => "hard-max",
            OpKind::Broadcast => "broadcast",
            OpKind::Transpose => "transpose",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorNode {
    pub id: NodeId,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub op: OpKind,
    pub parents: Vec<NodeId>,
    pub requires_grad: bool,
    /// True when some ancestor leaf requires a gradient.
    tracks_grad: bool,
    /// Argmax positions for hard-max nodes.
    aux: Vec<usize>,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<TensorNode>,
}

/// Leaf id → dLoss/dLeaf.
pub type Gradients = HashMap<NodeId, Vec<f64>>;

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Splits `shape` around `axis` into (outer, axis length, inner).
fn split_axis(shape: &[usize], axis: usize) -> Option<(usize, usize, usize)> {
    if axis >= shape.len() {
        return None;
    }
    Some((
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    ))
}

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut out: Vec<usize> = shape.to_vec();
    out.remove(axis);
    if out.is_empty() {
        out.push(1);
    }
    out
}

/// Shape of a bias row compatible with a `[p, q]` operand.
fn is_bias_row(lhs: &[usize], rhs: &[usize]) -> bool {
    lhs.len() == 2 && (rhs == [lhs[1]] || rhs == [1, lhs[1]])
}

fn broadcast_compatible(from: &[usize], to: &[usize]) -> bool {
    if from == [1] {
        return true;
    }
    from.len() == to.len() && from.iter().zip(to).all(|(&f, &t)| f == 1 || f == t)
}

/// Maps each flat index of `to` to the flat index of the broadcast source.
fn broadcast_index(from: &[usize], to: &[usize], mut flat: usize) -> usize {
    if from == [1] {
        return 0;
    }
    let mut src = 0;
    let mut stride = 1;
    for k in (0..to.len()).rev() {
        let coord = flat % to[k];
        flat /= to[k];
        if from[k] != 1 {
            src += coord * stride;
        }
        stride *= from[k];
    }
    src
}

const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    let t = (k * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Forward {
    value: Vec<f64>,
    shape: Vec<usize>,
    aux: Vec<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &TensorNode {
        &self.nodes[id]
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].shape
    }

    /// Value of a single-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[0]
    }

    pub fn leaf(&mut self, value: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<NodeId> {
        let id = self.nodes.len();
        if value.len() != numel(shape) || shape.iter().any(|&s| s == 0) {
            return Err(TapeError::Length {
                node: id,
                len: value.len(),
                shape: shape.to_vec(),
            });
        }
        self.nodes.push(TensorNode {
            id,
            shape: shape.to_vec(),
            value,
            op: OpKind::Leaf,
            parents: Vec::new(),
            requires_grad,
            tracks_grad: requires_grad,
            aux: Vec::new(),
        });
        Ok(id)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Vec<f64>, shape: &[usize]) -> Result<NodeId> {
        self.leaf(value, shape, false)
    }

    /// 1-D constant of the given values.
    pub fn vector(&mut self, value: &[f64]) -> Result<NodeId> {
        self.leaf(value.to_vec(), &[value.len()], false)
    }

    /// Replaces the value of a leaf; call [`Tape::evaluate`] to refresh dependents.
    pub fn set_leaf(&mut self, id: NodeId, value: Vec<f64>) -> Result<()> {
        let node = self.nodes.get_mut(id).ok_or(TapeError::UnknownNode { node: id })?;
        if node.op != OpKind::Leaf {
            return Err(TapeError::NotLeaf { node: id });
        }
        if value.len() != node.value.len() {
            return Err(TapeError::Length {
                node: id,
                len: value.len(),
                shape: node.shape.clone(),
            });
        }
        node.value = value;
        Ok(())
    }

    /// Recomputes every derived node in tape order and returns the final value.
    pub fn evaluate(&mut self) -> Result<&[f64]> {
        for id in 0..self.nodes.len() {
            if self.nodes[id].op == OpKind::Leaf {
                continue;
            }
            let op = self.nodes[id].op.clone();
            let parents = self.nodes[id].parents.clone();
            let fwd = self.forward(id, &op, &parents)?;
            let node = &mut self.nodes[id];
            node.value = fwd.value;
            node.shape = fwd.shape;
            node.aux = fwd.aux;
        }
        Ok(self.nodes.last().map(|n| n.value.as_slice()).unwrap_or(&[]))
    }

    fn push(&mut self, op: OpKind, parents: Vec<NodeId>) -> Result<NodeId> {
        let id = self.nodes.len();
        if let Some(&bad) = parents.iter().find(|&&p| p >= id) {
            return Err(TapeError::UnknownNode { node: bad });
        }
        let fwd = self.forward(id, &op, &parents)?;
        let tracks_grad = parents.iter().any(|&p| self.nodes[p].tracks_grad);
        self.nodes.push(TensorNode {
            id,
            shape: fwd.shape,
            value: fwd.value,
            op,
            parents,
            requires_grad: false,
            tracks_grad,
            aux: fwd.aux,
        });
        Ok(id)
    }

    fn shape_err(&self, id: NodeId, op: &OpKind, parents: &[NodeId]) -> TapeError {
        TapeError::Shape {
            node: id,
            op: op.name(),
            shapes: parents.iter().map(|&p| self.nodes[p].shape.clone()).collect(),
        }
    }

    fn forward(&self, id: NodeId, op: &OpKind, parents: &[NodeId]) -> Result<Forward> {
        let err = || self.shape_err(id, op, parents);
        let arg = |k: usize| &self.nodes[parents[k]];
        let unary = |f: &dyn Fn(f64) -> f64| {
            let a = arg(0);
            Forward {
                value: a.value.iter().map(|&x| f(x)).collect(),
                shape: a.shape.clone(),
                aux: Vec::new(),
            }
        };
        let out = match op {
            OpKind::Leaf => return Err(err()),
            OpKind::MatMul => {
                let (a, b) = (arg(0), arg(1));
                if a.shape.len() != 2 || b.shape.len() != 2 || a.shape[1] != b.shape[0] {
                    return Err(err());
                }
                let (p, q, s) = (a.shape[0], a.shape[1], b.shape[1]);
                let mut value = vec![0.0; p * s];
                for i in 0..p {
                    let row = &mut value[i * s..(i + 1) * s];
                    for k in 0..q {
                        let aik = a.value[i * q + k];
                        if aik == 0.0 {
                            continue;
                        }
                        let brow = &b.value[k * s..(k + 1) * s];
                        for (r, &bkj) in row.iter_mut().zip(brow) {
                            *r += aik * bkj;
                        }
                    }
                }
                Forward { value, shape: vec![p, s], aux: Vec::new() }
            }
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div => {
                let (a, b) = (arg(0), arg(1));
                let f: fn(f64, f64) -> f64 = match op {
                    OpKind::Add => |x, y| x + y,
                    OpKind::Sub => |x, y| x - y,
                    OpKind::Mul => |x, y| x * y,
                    _ => |x, y| x / y,
                };
                if a.shape == b.shape {
                    Forward {
                        value: a.value.iter().zip(&b.value).map(|(&x, &y)| f(x, y)).collect(),
                        shape: a.shape.clone(),
                        aux: Vec::new(),
                    }
                } else if *op == OpKind::Add && is_bias_row(&a.shape, &b.shape) {
                    let q = a.shape[1];
                    Forward {
                        value: a.value.iter().enumerate().map(|(i, &x)| x + b.value[i % q]).collect(),
                        shape: a.shape.clone(),
                        aux: Vec::new(),
                    }
                } else {
                    return Err(err());
                }
            }
            OpKind::Scale(c) => unary(&|x| c * x),
            OpKind::Shift(c) => unary(&|x| x + c),
            OpKind::Relu => unary(&|x| x.max(0.0)),
            OpKind::Gelu => unary(&gelu),
            OpKind::Sigmoid => unary(&sigmoid),
            OpKind::Sqrt => unary(&f64::sqrt),
            OpKind::Square => unary(&|x| x * x),
            OpKind::Sin => unary(&f64::sin),
            OpKind::Cos => unary(&f64::cos),
            OpKind::Powf(c) => unary(&|x| x.powf(*c)),
            OpKind::Softmax { axis } => {
                let a = arg(0);
                let (outer, len, inner) = split_axis(&a.shape, *axis).ok_or_else(err)?;
                let mut value = vec![0.0; a.value.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| o * len * inner + k * inner + i;
                        let max = (0..len).map(|k| a.value[at(k)]).fold(f64::NEG_INFINITY, f64::max);
                        let mut total = 0.0;
                        for k in 0..len {
                            let e = (a.value[at(k)] - max).exp();
                            value[at(k)] = e;
                            total += e;
                        }
                        for k in 0..len {
                            value[at(k)] /= total;
                        }
                    }
                }
                Forward { value, shape: a.shape.clone(), aux: Vec::new() }
            }
            OpKind::Concat { axis } => {
                let first = arg(0);
                if *axis >= first.shape.len() {
                    return Err(err());
                }
                let mut shape = first.shape.clone();
                shape[*axis] = 0;
                for &p in parents {
                    let s = &self.nodes[p].shape;
                    let same_rest = s.len() == first.shape.len()
                        && s.iter().zip(&first.shape).enumerate().all(|(k, (x, y))| k == *axis || x == y);
                    if !same_rest {
                        return Err(err());
                    }
                    shape[*axis] += s[*axis];
                }
                let outer = numel(&shape[..*axis]);
                let mut value = Vec::with_capacity(numel(&shape));
                for o in 0..outer {
                    for &p in parents {
                        let n = &self.nodes[p];
                        let chunk = n.shape[*axis] * numel(&n.shape[*axis + 1..]);
                        value.extend_from_slice(&n.value[o * chunk..(o + 1) * chunk]);
                    }
                }
                Forward { value, shape, aux: Vec::new() }
            }
            OpKind::Slice { axis, start, len: take } => {
                let a = arg(0);
                let (outer, len, inner) = split_axis(&a.shape, *axis).ok_or_else(err)?;
                if *take == 0 || start + take > len {
                    return Err(err());
                }
                let mut value = Vec::with_capacity(outer * take * inner);
                for o in 0..outer {
                    let base = o * len * inner + start * inner;
                    value.extend_from_slice(&a.value[base..base + take * inner]);
                }
                let mut shape = a.shape.clone();
                shape[*axis] = *take;
                Forward { value, shape, aux: Vec::new() }
            }
            OpKind::Mean { axis } | OpKind::Sum { axis } | OpKind::HardMax { axis } => {
                let a = arg(0);
                let (outer, len, inner) = split_axis(&a.shape, *axis).ok_or_else(err)?;
                let mut value = vec![0.0; outer * inner];
                let mut aux = Vec::new();
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| o * len * inner + k * inner + i;
                        value[o * inner + i] = match op {
                            OpKind::HardMax { .. } => {
                                let mut best = 0;
                                for k in 1..len {
                                    // strict > keeps the lowest index on ties
                                    if a.value[at(k)] > a.value[at(best)] {
                                        best = k;
                                    }
                                }
                                aux.push(best);
                                a.value[at(best)]
                            }
                            _ => {
                                let s: f64 = (0..len).map(|k| a.value[at(k)]).sum();
                                if matches!(op, OpKind::Mean { .. }) {
                                    s / len as f64
                                } else {
                                    s
                                }
                            }
                        };
                    }
                }
                Forward { value, shape: reduced_shape(&a.shape, *axis), aux }
            }
            OpKind::Broadcast => {
                let (a, target) = (arg(0), arg(1));
                if !broadcast_compatible(&a.shape, &target.shape) {
                    return Err(err());
                }
                let n = numel(&target.shape);
                Forward {
                    value: (0..n).map(|j| a.value[broadcast_index(&a.shape, &target.shape, j)]).collect(),
                    shape: target.shape.clone(),
                    aux: Vec::new(),
                }
            }
            OpKind::Transpose => {
                let a = arg(0);
                if a.shape.len() != 2 {
                    return Err(err());
                }
                let (p, q) = (a.shape[0], a.shape[1]);
                let mut value = vec![0.0; p * q];
                for i in 0..p {
                    for j in 0..q {
                        value[j * p + i] = a.value[i * q + j];
                    }
                }
                Forward { value, shape: vec![q, p], aux: Vec::new() }
            }
        };
        Ok(out)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(OpKind::MatMul, vec![a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(OpKind::Add, vec![a, b])
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(OpKind::Sub, vec![a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(OpKind::Mul, vec![a, b])
    }
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(OpKind::Div, vec![a, b])
    }
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.push(OpKind::Scale(c), vec![a])
    }
    pub fn shift(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.push(OpKind::Shift(c), vec![a])
    }
    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Relu, vec![a])
    }
    pub fn gelu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Gelu, vec![a])
    }
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Sigmoid, vec![a])
    }
    pub fn softmax(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        self.push(OpKind::Softmax { axis }, vec![a])
    }
    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Sqrt, vec![a])
    }
    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Square, vec![a])
    }
    pub fn sin(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Sin, vec![a])
    }
    pub fn cos(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Cos, vec![a])
    }
    pub fn powf(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.push(OpKind::Powf(c), vec![a])
    }
    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.push(OpKind::Concat { axis }, parts.to_vec())
    }
    pub fn slice(&mut self, a: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        self.push(OpKind::Slice { axis, start, len }, vec![a])
    }
    pub fn mean(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        self.push(OpKind::Mean { axis }, vec![a])
    }
    pub fn sum(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        self.push(OpKind::Sum { axis }, vec![a])
    }
    pub fn hard_max(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        self.push(OpKind::HardMax { axis }, vec![a])
    }
    /// Broadcasts `a` to the shape of `like`. `like` only supplies a shape.
    pub fn broadcast(&mut self, a: NodeId, like: NodeId) -> Result<NodeId> {
        self.push(OpKind::Broadcast, vec![a, like])
    }
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(OpKind::Transpose, vec![a])
    }

    /// Argmax indices recorded by a hard-max node.
    pub fn argmax(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].aux
    }

    /// Reverse sweep from a scalar loss. Returns gradients for every leaf
    /// with `requires_grad`; leaves off the loss path get zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_node = self.nodes.get(loss).ok_or(TapeError::UnknownNode { node: loss })?;
        if loss_node.value.len() != 1 {
            return Err(TapeError::NonScalarLoss {
                node: loss,
                shape: loss_node.shape.clone(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss + 1];
        grads[loss] = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if g.iter().any(|v| v.is_nan()) {
                return Err(TapeError::NanGradient { node: id });
            }
            if node.op == OpKind::Leaf {
                grads[id] = Some(g);
                continue;
            }
            for (k, contrib) in self.vjp(node, &g) {
                let parent = node.parents[k];
                if !self.nodes[parent].tracks_grad {
                    continue;
                }
                match &mut grads[parent] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
                    slot => *slot = Some(contrib),
                }
            }
        }
        let mut out = Gradients::new();
        for node in self.nodes.iter().filter(|n| n.op == OpKind::Leaf && n.requires_grad) {
            let g = grads
                .get_mut(node.id)
                .and_then(Option::take)
                .unwrap_or_else(|| vec![0.0; node.value.len()]);
            out.insert(node.id, g);
        }
        Ok(out)
    }

    /// Vector-Jacobian products for each parent that tracks gradients.
    fn vjp(&self, node: &TensorNode, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let parent = |k: usize| &self.nodes[node.parents[k]];
        let wants = |k: usize| parent(k).tracks_grad;
        let elementwise = |d: &dyn Fn(usize, f64) -> f64| {
            let x = &parent(0).value;
            vec![(0, g.iter().enumerate().map(|(i, &gi)| gi * d(i, x[i])).collect())]
        };
        match &node.op {
            OpKind::Leaf => Vec::new(),
            OpKind::MatMul => {
                let (a, b) = (parent(0), parent(1));
                let (p, q, s) = (a.shape[0], a.shape[1], b.shape[1]);
                let mut out = Vec::new();
                if wants(0) {
                    // dA = G · Bᵀ
                    let mut da = vec![0.0; p * q];
                    for i in 0..p {
                        let grow = &g[i * s..(i + 1) * s];
                        for k in 0..q {
                            let brow = &b.value[k * s..(k + 1) * s];
                            da[i * q + k] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    out.push((0, da));
                }
                if wants(1) {
                    // dB = Aᵀ · G
                    let mut db = vec![0.0; q * s];
                    for i in 0..p {
                        let grow = &g[i * s..(i + 1) * s];
                        for k in 0..q {
                            let aik = a.value[i * q + k];
                            if aik == 0.0 {
                                continue;
                            }
                            for (d, &gj) in db[k * s..(k + 1) * s].iter_mut().zip(grow) {
                                *d += aik * gj;
                            }
                        }
                    }
                    out.push((1, db));
                }
                out
            }
            OpKind::Add | OpKind::Sub => {
                let sign = if node.op == OpKind::Sub { -1.0 } else { 1.0 };
                let (a, b) = (parent(0), parent(1));
                let mut out = vec![(0, g.to_vec())];
                if a.shape == b.shape {
                    out.push((1, g.iter().map(|&x| sign * x).collect()));
                } else {
                    let q = a.shape[1];
                    let mut db = vec![0.0; q];
                    for (i, &gi) in g.iter().enumerate() {
                        db[i % q] += gi;
                    }
                    out.push((1, db));
                }
                out
            }
            OpKind::Mul => {
                let (a, b) = (&parent(0).value, &parent(1).value);
                vec![
                    (0, g.iter().zip(b).map(|(gi, bi)| gi * bi).collect()),
                    (1, g.iter().zip(a).map(|(gi, ai)| gi * ai).collect()),
                ]
            }
            OpKind::Div => {
                let (a, b) = (&parent(0).value, &parent(1).value);
                vec![
                    (0, g.iter().zip(b).map(|(gi, bi)| gi / bi).collect()),
                    (
                        1,
                        g.iter()
                            .zip(a.iter().zip(b))
                            .map(|(gi, (ai, bi))| -gi * ai / (bi * bi))
                            .collect(),
                    ),
                ]
            }
            OpKind::Scale(c) => vec![(0, g.iter().map(|&x| c * x).collect())],
            OpKind::Shift(_) => vec![(0, g.to_vec())],
            OpKind::Relu => elementwise(&|_, x| if x > 0.0 { 1.0 } else { 0.0 }),
            OpKind::Gelu => elementwise(&|_, x| gelu_grad(x)),
            OpKind::Sigmoid => elementwise(&|i, _| node.value[i] * (1.0 - node.value[i])),
            // sqrt'(0) is taken as 0 so saturated softmax inputs stay finite
            OpKind::Sqrt => elementwise(&|i, _| {
                let y = node.value[i];
                if y > 0.0 {
                    0.5 / y
                } else {
                    0.0
                }
            }),
            OpKind::Square => elementwise(&|_, x| 2.0 * x),
            OpKind::Sin => elementwise(&|_, x| x.cos()),
            OpKind::Cos => elementwise(&|_, x| -x.sin()),
            OpKind::Powf(c) => elementwise(&|_, x| c * x.powf(c - 1.0)),
            OpKind::Softmax { axis } => {
                let (outer, len, inner) = split_axis(&node.shape, *axis).expect("validated in forward");
                let y = &node.value;
                let mut dx = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| o * len * inner + k * inner + i;
                        let dot: f64 = (0..len).map(|k| g[at(k)] * y[at(k)]).sum();
                        for k in 0..len {
                            dx[at(k)] = y[at(k)] * (g[at(k)] - dot);
                        }
                    }
                }
                vec![(0, dx)]
            }
            OpKind::Concat { axis } => {
                let outer = numel(&node.shape[..*axis]);
                let total = node.shape[*axis] * numel(&node.shape[*axis + 1..]);
                let mut out = Vec::new();
                let mut offset = 0;
                for k in 0..node.parents.len() {
                    let p = parent(k);
                    let chunk = p.shape[*axis] * numel(&p.shape[*axis + 1..]);
                    if wants(k) {
                        let mut d = Vec::with_capacity(p.value.len());
                        for o in 0..outer {
                            let base = o * total + offset;
                            d.extend_from_slice(&g[base..base + chunk]);
                        }
                        out.push((k, d));
                    }
                    offset += chunk;
                }
                out
            }
            OpKind::Slice { axis, start, len: take } => {
                let p = parent(0);
                let (outer, len, inner) = split_axis(&p.shape, *axis).expect("validated in forward");
                let mut d = vec![0.0; p.value.len()];
                for o in 0..outer {
                    let base = o * len * inner + start * inner;
                    let src = o * take * inner;
                    d[base..base + take * inner].copy_from_slice(&g[src..src + take * inner]);
                }
                vec![(0, d)]
            }
            OpKind::Mean { axis } | OpKind::Sum { axis } | OpKind::HardMax { axis } => {
                let p = parent(0);
                let (outer, len, inner) = split_axis(&p.shape, *axis).expect("validated in forward");
                let mut d = vec![0.0; p.value.len()];
                let w = if matches!(node.op, OpKind::Mean { .. }) { 1.0 / len as f64 } else { 1.0 };
                for o in 0..outer {
                    for i in 0..inner {
                        let gi = g[o * inner + i];
                        let at = |k: usize| o * len * inner + k * inner + i;
                        if matches!(node.op, OpKind::HardMax { .. }) {
                            d[at(node.aux[o * inner + i])] += gi;
                        } else {
                            for k in 0..len {
                                d[at(k)] += w * gi;
                            }
                        }
                    }
                }
                vec![(0, d)]
            }
            OpKind::Broadcast => {
                let p = parent(0);
                let mut d = vec![0.0; p.value.len()];
                for (j, &gj) in g.iter().enumerate() {
                    d[broadcast_index(&p.shape, &node.shape, j)] += gj;
                }
                vec![(0, d)]
            }
            OpKind::Transpose => {
                let (q, p) = (node.shape[0], node.shape[1]);
                let mut d = vec![0.0; p * q];
                for j in 0..q {
                    for i in 0..p {
                        d[i * q + j] = g[j * p + i];
                    }
                }
                vec![(0, d)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_softmax_sigmoid_forward() {
        let mut t = Tape::new();
        let x = t.vector(&[-1.0, 0.0, 2.0]).unwrap();
        let r = t.relu(x).unwrap();
        assert_eq!(t.value(r), &[0.0, 0.0, 2.0]);

        let z = t.vector(&[0.0, 0.0, 0.0]).unwrap();
        let s = t.softmax(z, 0).unwrap();
        for &v in t.value(s) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let h = t.vector(&[0.0]).unwrap();
        let sg = t.sigmoid(h).unwrap();
        assert_eq!(t.value(sg), &[0.5]);
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(vec![3.0], &[1], true).unwrap();
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g[&x], vec![6.0]);
    }

    #[test]
    fn hard_max_ties_go_to_lowest_index() {
        let mut t = Tape::new();
        let x = t.leaf(vec![2.0, 5.0, 5.0], &[3], true).unwrap();
        let m = t.hard_max(x, 0).unwrap();
        assert_eq!(t.scalar(m), 5.0);
        assert_eq!(t.argmax(m), &[1]);
        let g = t.backward(m).unwrap();
        assert_eq!(g[&x], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, 2.0], &[2], true).unwrap();
        assert!(matches!(t.backward(x), Err(TapeError::NonScalarLoss { .. })));
    }

    #[test]
    fn nan_gradient_names_the_node() {
        let mut t = Tape::new();
        let x = t.leaf(vec![-1.0], &[1], true).unwrap();
        let y = t.powf(x, 0.5).unwrap();
        let s = t.sum(y, 0).unwrap();
        // d/dx x^0.5 at -1 is NaN
        let err = t.backward(s).unwrap_err();
        assert!(matches!(err, TapeError::NanGradient { .. }));
    }

    #[test]
    fn shape_mismatch_reports_node_and_shapes() {
        let mut t = Tape::new();
        let a = t.constant(vec![0.0; 6], &[2, 3]).unwrap();
        let b = t.constant(vec![0.0; 6], &[2, 3]).unwrap();
        match t.matmul(a, b) {
            Err(TapeError::Shape { node, shapes, .. }) => {
                assert_eq!(node, 2);
                assert_eq!(shapes, vec![vec![2, 3], vec![2, 3]]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
        let c = t.constant(vec![0.0; 2], &[2]).unwrap();
        assert!(t.mul(a, c).is_err());
    }

    #[test]
    fn bias_row_broadcasts_over_tokens() {
        let mut t = Tape::new();
        let a = t.constant(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        let b = t.leaf(vec![10.0, 20.0], &[2], true).unwrap();
        let y = t.add(a, b).unwrap();
        assert_eq!(t.value(y), &[11.0, 22.0, 13.0, 24.0]);
        let s = t.sum(y, 1).unwrap();
        let s = t.sum(s, 0).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g[&b], vec![2.0, 2.0]);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0], &[1], true).unwrap();
        let unused = t.leaf(vec![1.0, 1.0], &[2], true).unwrap();
        let y = t.scale(x, 4.0).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g[&x], vec![4.0]);
        assert_eq!(g[&unused], vec![0.0, 0.0]);
    }

    #[test]
    fn evaluate_replays_after_leaf_update() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, 2.0], &[2], true).unwrap();
        let y = t.square(x).unwrap();
        let _s = t.sum(y, 0).unwrap();
        t.set_leaf(x, vec![3.0, 4.0]).unwrap();
        assert_eq!(t.evaluate().unwrap(), &[25.0]);
        assert!(matches!(t.set_leaf(y, vec![0.0, 0.0]), Err(TapeError::NotLeaf { .. })));
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let mut t = Tape::new();
        let a = t.constant(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        let b = t.constant(vec![5.0, 6.0], &[2, 1]).unwrap();
        let c = t.concat(&[a, b], 1).unwrap();
        assert_eq!(t.shape(c), &[2, 3]);
        assert_eq!(t.value(c), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let s = t.slice(c, 1, 2, 1).unwrap();
        assert_eq!(t.value(s), &[5.0, 6.0]);
    }
}
