//! Reverse-mode differentiation over the handful of primitives the codec uses.
//!
//! A [`Tape`] records every operation together with its forward value. Calling
//! [`Tape::backward`] walks the record in reverse and returns the gradient of a
//! scalar node with respect to every parameter registered with
//! [`Tape::param`]. Nodes that cannot reach a parameter are skipped.
//!
//! The [`Backend`] trait lets the encoder and decoder be written once and run
//! either eagerly on plain tensors ([`Eager`]) or recorded on a tape.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::functions::{self, selu, selu_derivative, sigmoid};
use crate::nn::mlp::{DenseLayer, Mlp};
use crate::nn::tensor::{matmul, matmul_transa_acc};
use crate::nn::Tensor;

/// Index of a parameter tensor in a model's canonical order.
pub type ParamId = usize;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Dense { x: Var, w: Var, b: Var },
    Selu(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat(Var, Var, usize),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    PowerNormalize(Var),
    Bce { logits: Var, targets: Var },
    Sum(Var),
    SumSquares(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients keyed by parameter id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    map: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.map.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.map.iter().map(|(&k, v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn insert(&mut self, id: ParamId, g: Tensor) {
        self.map.insert(id, g);
    }

    /// Adds `scale * other` into `self`.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (&id, g) in &other.map {
            let mut scaled = g.clone();
            scaled.scale_in_place(scale);
            match self.map.get_mut(&id) {
                Some(existing) => existing.add_assign(&scaled),
                None => {
                    self.map.insert(id, scaled);
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.map.values().all(Tensor::all_finite)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn param(&mut self, id: ParamId, t: &Tensor) -> Var {
        self.push(t.clone(), Op::Param(id), true)
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.shape().len() != 2 || xv.last_dim() != wv.shape()[1] || bv.shape() != [wv.shape()[0]] {
            return Err(Error::Shape(format!(
                "dense layer {:?} cannot consume input {:?}",
                wv.shape(),
                xv.shape()
            )));
        }
        let layer = DenseLayer {
            weights: wv.clone(),
            bias: bv.clone(),
        };
        let out = layer.forward(xv);
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Dense { x, w, b }, rg))
    }

    pub fn selu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(selu);
        let rg = self.rg(x);
        self.push(out, Op::Selu(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let out = self.value(x).permute(axes)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Permute(x, axes.to_vec()), rg))
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let out = Tensor::concat(self.value(a), self.value(b), axis)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Concat(a, b, axis), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, s), rg)
    }

    /// Per trailing-axis row: `sqrt(n) * c / ||c||`.
    pub fn power_normalize(&mut self, x: Var) -> Result<Var> {
        let out = functions::power_normalize(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::PowerNormalize(x), rg))
    }

    /// Scalar mean BCE-with-logits loss.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Var) -> Result<Var> {
        let l = functions::bce_with_logits(self.value(logits), self.value(targets))?;
        let rg = self.rg(logits);
        Ok(self.push(Tensor::scalar(l), Op::Bce { logits, targets }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).sum_squares();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::SumSquares(x), rg)
    }

    /// Gradient of the (scalar) node `loss` with respect to every parameter
    /// that contributed to it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::NoForwardPass);
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => match out.map.get_mut(id) {
                    Some(existing) => existing.add_assign(&g),
                    None => {
                        out.map.insert(*id, g);
                    }
                },
                Op::Dense { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (rows, din, dout) = (xv.leading(), wv.shape()[1], wv.shape()[0]);
                    if self.rg(*x) {
                        let mut gx = vec![0.0; rows * din];
                        matmul(g.data(), wv.data(), rows, dout, din, &mut gx);
                        add_grad(&mut grads, *x, Tensor::new(xv.shape(), gx)?);
                    }
                    if self.rg(*w) {
                        let mut gw = vec![0.0; dout * din];
                        matmul_transa_acc(g.data(), xv.data(), rows, dout, din, &mut gw);
                        add_grad(&mut grads, *w, Tensor::new(wv.shape(), gw)?);
                    }
                    if self.rg(*b) {
                        let mut gb = vec![0.0; dout];
                        for row in g.data().chunks(dout) {
                            for (acc, v) in gb.iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                        add_grad(&mut grads, *b, Tensor::new(&[dout], gb)?);
                    }
                }
                Op::Selu(x) => {
                    let gx = self.value(*x).zip_map(&g, |v, d| selu_derivative(v) * d)?;
                    add_grad(&mut grads, *x, gx);
                }
                Op::Reshape(x) => {
                    let gx = g.into_reshape(self.value(*x).shape())?;
                    add_grad(&mut grads, *x, gx);
                }
                Op::Permute(x, axes) => {
                    let mut inverse = vec![0; axes.len()];
                    for (i, &a) in axes.iter().enumerate() {
                        inverse[a] = i;
                    }
                    add_grad(&mut grads, *x, g.permute(&inverse)?);
                }
                Op::Concat(a, b, axis) => {
                    let first = self.value(*a).shape()[*axis];
                    let (ga, gb) = g.split(*axis, first);
                    if self.rg(*a) {
                        add_grad(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        add_grad(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*b) {
                        add_grad(&mut grads, *b, g.clone());
                    }
                    if self.rg(*a) {
                        add_grad(&mut grads, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.rg(*b) {
                        add_grad(&mut grads, *b, g.map(|v| -v));
                    }
                    if self.rg(*a) {
                        add_grad(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        add_grad(&mut grads, *a, g.zip_map(self.value(*b), |d, y| d * y)?);
                    }
                    if self.rg(*b) {
                        add_grad(&mut grads, *b, g.zip_map(self.value(*a), |d, x| d * x)?);
                    }
                }
                Op::Scale(x, s) => {
                    add_grad(&mut grads, *x, g.map(|v| v * s));
                }
                Op::PowerNormalize(x) => {
                    let xv = self.value(*x);
                    let n = xv.last_dim();
                    let target = (n as f64).sqrt();
                    let mut gx = vec![0.0; xv.len()];
                    for ((c, d), o) in xv.data().chunks(n).zip(g.data().chunks(n)).zip(gx.chunks_mut(n)) {
                        let sq: f64 = c.iter().map(|v| v * v).sum();
                        let norm = sq.sqrt();
                        let dot: f64 = c.iter().zip(d).map(|(a, b)| a * b).sum();
                        let s = target / norm;
                        for ((oi, ci), di) in o.iter_mut().zip(c).zip(d) {
                            *oi = s * (di - ci * dot / sq);
                        }
                    }
                    add_grad(&mut grads, *x, Tensor::new(xv.shape(), gx)?);
                }
                Op::Bce { logits, targets } => {
                    let (lv, tv) = (self.value(*logits), self.value(*targets));
                    let scale = g.data()[0] / lv.len() as f64;
                    let gl = lv.zip_map(tv, |x, u| (sigmoid(x) - u) * scale)?;
                    add_grad(&mut grads, *logits, gl);
                }
                Op::Sum(x) => {
                    let d = g.data()[0];
                    add_grad(&mut grads, *x, Tensor::full(self.value(*x).shape(), d));
                }
                Op::SumSquares(x) => {
                    let d = g.data()[0];
                    add_grad(&mut grads, *x, self.value(*x).map(|v| 2.0 * v * d));
                }
            }
        }
        Ok(out)
    }
}

fn add_grad(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Evaluation strategy for code written once against both plain tensors and
/// recorded tapes.
pub trait Backend {
    type Value: Clone;

    fn shape(&self, x: &Self::Value) -> Vec<usize>;

    /// Applies `layer`. When `params` is `Some((weight_id, bias_id))` and the
    /// backend records, the layer's tensors become differentiable parameters.
    fn dense(&mut self, x: &Self::Value, layer: &DenseLayer, params: Option<(ParamId, ParamId)>)
        -> Result<Self::Value>;

    fn selu(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn reshape(&mut self, x: &Self::Value, shape: &[usize]) -> Result<Self::Value>;
    fn permute(&mut self, x: &Self::Value, axes: &[usize]) -> Result<Self::Value>;
    fn concat(&mut self, a: &Self::Value, b: &Self::Value, axis: usize) -> Result<Self::Value>;
    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn power_normalize(&mut self, x: &Self::Value) -> Result<Self::Value>;

    /// Runs `net` with its parameters numbered from `first_param` when trainable.
    fn mlp(&mut self, net: &Mlp, x: &Self::Value, first_param: Option<ParamId>) -> Result<Self::Value> {
        let last = net.layers().len() - 1;
        let mut h = x.clone();
        for (i, layer) in net.layers().iter().enumerate() {
            let trailing = *self.shape(&h).last().unwrap();
            if trailing != layer.in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} expects trailing axis {} but got {:?}",
                    layer.in_dim(),
                    self.shape(&h)
                )));
            }
            let ids = first_param.map(|base| (base + 2 * i, base + 2 * i + 1));
            h = self.dense(&h, layer, ids)?;
            if i < last {
                h = self.selu(&h)?;
            }
        }
        Ok(h)
    }
}

/// Plain forward evaluation with no recording.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eager;

impl Backend for Eager {
    type Value = Tensor;

    fn shape(&self, x: &Tensor) -> Vec<usize> {
        x.shape().to_vec()
    }

    fn dense(&mut self, x: &Tensor, layer: &DenseLayer, _: Option<(ParamId, ParamId)>) -> Result<Tensor> {
        Ok(layer.forward(x))
    }

    fn selu(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(x.map(selu))
    }

    fn reshape(&mut self, x: &Tensor, shape: &[usize]) -> Result<Tensor> {
        x.reshape(shape)
    }

    fn permute(&mut self, x: &Tensor, axes: &[usize]) -> Result<Tensor> {
        x.permute(axes)
    }

    fn concat(&mut self, a: &Tensor, b: &Tensor, axis: usize) -> Result<Tensor> {
        Tensor::concat(a, b, axis)
    }

    fn sub(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        a.zip_map(b, |x, y| x - y)
    }

    fn power_normalize(&mut self, x: &Tensor) -> Result<Tensor> {
        functions::power_normalize(x)
    }
}

impl Backend for Tape {
    type Value = Var;

    fn shape(&self, x: &Var) -> Vec<usize> {
        self.value(*x).shape().to_vec()
    }

    fn dense(&mut self, x: &Var, layer: &DenseLayer, params: Option<(ParamId, ParamId)>) -> Result<Var> {
        let (w, b) = match params {
            Some((wid, bid)) => (self.param(wid, &layer.weights), self.param(bid, &layer.bias)),
            None => (self.constant(layer.weights.clone()), self.constant(layer.bias.clone())),
        };
        Tape::dense(self, *x, w, b)
    }

    fn selu(&mut self, x: &Var) -> Result<Var> {
        Ok(Tape::selu(self, *x))
    }

    fn reshape(&mut self, x: &Var, shape: &[usize]) -> Result<Var> {
        Tape::reshape(self, *x, shape)
    }

    fn permute(&mut self, x: &Var, axes: &[usize]) -> Result<Var> {
        Tape::permute(self, *x, axes)
    }

    fn concat(&mut self, a: &Var, b: &Var, axis: usize) -> Result<Var> {
        Tape::concat(self, *a, *b, axis)
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        Tape::sub(self, *a, *b)
    }

    fn power_normalize(&mut self, x: &Var) -> Result<Var> {
        Tape::power_normalize(self, *x)
    }
}
