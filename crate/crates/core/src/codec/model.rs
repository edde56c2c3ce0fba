//! The product autoencoder: two encoder networks and `2I` decoder networks.
//!
//! Codeword layout is `(B, n1, n2)` flattened row-major, with the `n2` axis
//! produced by `E2` and consumed first by `D2`. Decoding follows the
//! iterative schedule `D2^(1), D1^(1), ..., D2^(I), D1^(I)` with the channel
//! observation concatenated into every decoder but the first and last, and
//! soft-information increments passed between iterations.
//!
//! Parameter tensors are numbered in a fixed canonical order: every layer of
//! `E1` (weights then bias), then `E2`, then `D2^(1)`, `D1^(1)`, and so on.
//! That numbering is the [`ParamId`] used by the tape, the optimizers and the
//! checkpoint payload.

use std::ops::Range;

use rand::Rng;

use crate::codec::bits::{hard_decision, MessageBatch};
use crate::codec::spec::{decoder_io_sizes, DecoderAxis, ProductAeSpec};
use crate::error::{Error, Result};
use crate::nn::{Backend, Eager, Mlp, ParamId, ParamStore, Tensor};

/// Which decoder networks are trainable in a recorded pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderTraining {
    Frozen,
    All,
    /// Only pair `i` (1-based).
    Pair(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderPair {
    /// Works along the `n2` axis.
    pub column: Mlp,
    /// Works along the `n1` axis.
    pub row: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductAeModel {
    spec: ProductAeSpec,
    encoder1: Mlp,
    encoder2: Mlp,
    pairs: Vec<DecoderPair>,
    /// First parameter id of each network in canonical order.
    offsets: Vec<ParamId>,
}

impl ProductAeModel {
    pub fn new<R: Rng + ?Sized>(spec: ProductAeSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let e1 = &spec.encoder1;
        let e2 = &spec.encoder2;
        let encoder1 = Mlp::new(spec.k1, spec.n1, e1.hidden_width, e1.hidden_layers, rng);
        let encoder2 = Mlp::new(spec.k2, spec.n2, e2.hidden_width, e2.hidden_layers, rng);
        let table = decoder_io_sizes(&spec);
        let mut pairs = Vec::with_capacity(spec.iterations);
        for chunk in table.chunks(2) {
            let shape = if chunk[0].iteration == spec.iterations {
                spec.last_pair
            } else {
                spec.decoder
            };
            let mut make = |io: &crate::codec::spec::DecoderIo| {
                Mlp::new(io.in_dim, io.out_dim, shape.hidden_width, shape.hidden_layers, rng)
            };
            let column = make(&chunk[0]);
            let row = make(&chunk[1]);
            pairs.push(DecoderPair { column, row });
        }
        Self::from_parts(spec, encoder1, encoder2, pairs)
    }

    /// Assembles a model from explicit networks, checking every dimension.
    pub fn from_parts(spec: ProductAeSpec, encoder1: Mlp, encoder2: Mlp, pairs: Vec<DecoderPair>) -> Result<Self> {
        spec.validate()?;
        let check = |name: &str, net: &Mlp, din: usize, dout: usize| {
            if net.in_dim() != din || net.out_dim() != dout {
                Err(Error::Shape(format!(
                    "{name} maps {} -> {} but the code needs {din} -> {dout}",
                    net.in_dim(),
                    net.out_dim()
                )))
            } else {
                Ok(())
            }
        };
        check("E1", &encoder1, spec.k1, spec.n1)?;
        check("E2", &encoder2, spec.k2, spec.n2)?;
        if pairs.len() != spec.iterations {
            return Err(Error::Shape(format!(
                "{} decoder pairs for I = {}",
                pairs.len(),
                spec.iterations
            )));
        }
        for (io, net) in decoder_io_sizes(&spec)
            .iter()
            .zip(pairs.iter().flat_map(|p| [&p.column, &p.row]))
        {
            check(&io.name(), net, io.in_dim, io.out_dim)?;
        }
        let mut model = Self {
            spec,
            encoder1,
            encoder2,
            pairs,
            offsets: Vec::new(),
        };
        let mut next = 0;
        let offsets: Vec<ParamId> = model
            .networks()
            .map(|net| {
                let start = next;
                next += net.tensor_count();
                start
            })
            .collect();
        model.offsets = offsets;
        Ok(model)
    }

    pub fn spec(&self) -> &ProductAeSpec {
        &self.spec
    }

    pub fn encoder1(&self) -> &Mlp {
        &self.encoder1
    }

    pub fn encoder2(&self) -> &Mlp {
        &self.encoder2
    }

    pub fn encoder1_mut(&mut self) -> &mut Mlp {
        &mut self.encoder1
    }

    pub fn encoder2_mut(&mut self) -> &mut Mlp {
        &mut self.encoder2
    }

    pub fn pairs(&self) -> &[DecoderPair] {
        &self.pairs
    }

    pub fn pairs_mut(&mut self) -> &mut [DecoderPair] {
        &mut self.pairs
    }

    /// Networks in canonical order: `E1, E2, D2^(1), D1^(1), ...`.
    pub fn networks(&self) -> impl Iterator<Item = &Mlp> {
        [&self.encoder1, &self.encoder2]
            .into_iter()
            .chain(self.pairs.iter().flat_map(|p| [&p.column, &p.row]))
    }

    fn network_mut(&mut self, index: usize) -> &mut Mlp {
        match index {
            0 => &mut self.encoder1,
            1 => &mut self.encoder2,
            _ => {
                let pair = &mut self.pairs[(index - 2) / 2];
                if index.is_multiple_of(2) {
                    &mut pair.column
                } else {
                    &mut pair.row
                }
            }
        }
    }

    fn network(&self, index: usize) -> &Mlp {
        self.networks().nth(index).expect("network index")
    }

    /// Total number of parameter tensors.
    pub fn tensor_count(&self) -> usize {
        self.networks().map(Mlp::tensor_count).sum()
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.networks().map(Mlp::param_count).sum()
    }

    /// Parameter tensors in canonical order.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.networks()
            .flat_map(|n| n.layers().iter().flat_map(|l| [&l.weights, &l.bias]))
            .collect()
    }

    fn network_ids(&self, index: usize) -> Range<ParamId> {
        let start = self.offsets[index];
        start..start + self.network(index).tensor_count()
    }

    pub fn encoder_ids(&self) -> Vec<ParamId> {
        (self.offsets[0]..self.offsets[2]).collect()
    }

    pub fn decoder_ids(&self) -> Vec<ParamId> {
        (self.offsets[2]..self.tensor_count()).collect()
    }

    /// Parameter ids of decoder pair `i` (1-based).
    pub fn pair_ids(&self, i: usize) -> Vec<ParamId> {
        let col = self.network_ids(2 * i);
        let row = self.network_ids(2 * i + 1);
        col.chain(row).collect()
    }

    fn locate(&self, id: ParamId) -> (usize, usize) {
        let net = self.offsets.partition_point(|&o| o <= id) - 1;
        (net, id - self.offsets[net])
    }

    /// Applies the encoder networks to `symbols` (`B x k`, entries ±1) and
    /// returns power-normalized codewords `B x n`.
    pub fn encode_with<B: Backend>(&self, be: &mut B, symbols: &B::Value, trainable: bool) -> Result<B::Value> {
        let s = &self.spec;
        let shape = be.shape(symbols);
        if shape.len() != 2 || shape[1] != s.k() {
            return Err(Error::Shape(format!(
                "encoder expects (B, {}) messages, got {shape:?}",
                s.k()
            )));
        }
        let batch = shape[0];
        let ids = |i: usize| trainable.then(|| self.offsets[i]);
        let u = be.reshape(symbols, &[batch, s.k2, s.k1])?;
        let mut x = be.mlp(&self.encoder1, &u, ids(0))?;
        if s.normalize_after_first_encoder {
            let flat = be.reshape(&x, &[batch, s.k2 * s.n1])?;
            let normed = be.power_normalize(&flat)?;
            x = be.reshape(&normed, &[batch, s.k2, s.n1])?;
        }
        let x = be.permute(&x, &[0, 2, 1])?;
        let x = be.mlp(&self.encoder2, &x, ids(1))?;
        let c = be.reshape(&x, &[batch, s.n()])?;
        be.power_normalize(&c)
    }

    /// Maps channel outputs `B x n` to message logits `B x k`.
    pub fn decode_with<B: Backend>(
        &self,
        be: &mut B,
        received: &B::Value,
        training: DecoderTraining,
    ) -> Result<B::Value> {
        let s = &self.spec;
        let shape = be.shape(received);
        if shape.len() != 2 || shape[1] != s.n() {
            return Err(Error::Shape(format!(
                "decoder expects (B, {}) observations, got {shape:?}",
                s.n()
            )));
        }
        let (b, n1, n2, k1, k2, f) = (shape[0], s.n1, s.n2, s.k1, s.k2, s.features);
        let iters = s.iterations;
        let ids = |iteration: usize, axis: DecoderAxis| -> Option<ParamId> {
            let train = match training {
                DecoderTraining::Frozen => false,
                DecoderTraining::All => true,
                DecoderTraining::Pair(p) => p == iteration,
            };
            let index = 2 * iteration + matches!(axis, DecoderAxis::Row) as usize;
            train.then(|| self.offsets[index])
        };
        let run = |be: &mut B, iteration: usize, axis: DecoderAxis, x: &B::Value| {
            let pair = &self.pairs[iteration - 1];
            let (net, tag) = match axis {
                DecoderAxis::Column => (&pair.column, 2),
                DecoderAxis::Row => (&pair.row, 1),
            };
            be.mlp(net, x, ids(iteration, axis))
                .map_err(|e| Error::Shape(format!("decoder D{tag}^({iteration}): {e}")))
        };

        let y = be.reshape(received, &[b, n1, n2])?;
        let mut y22_in = y.clone();
        let mut y21_in: Option<B::Value> = None;
        for i in 1..iters {
            let y2 = if i == 1 {
                let out = run(be, 1, DecoderAxis::Column, &y)?;
                be.reshape(&out, &[b, f * n1, n2])?
            } else {
                let out = run(be, i, DecoderAxis::Column, &y22_in)?;
                let prev = y21_in.as_ref().expect("soft input after first iteration");
                let diff = be.sub(&out, prev)?;
                be.reshape(&diff, &[b, f * n1, n2])?
            };
            let cat = be.concat(&y, &y2, 1)?;
            let y1_in = be.permute(&cat, &[0, 2, 1])?;
            let out = run(be, i, DecoderAxis::Row, &y1_in)?;
            let y1 = be.permute(&out, &[0, 2, 1])?;
            let diff = be.sub(&y1, &y2)?;
            let soft = be.reshape(&diff, &[b, n1, f * n2])?;
            y22_in = be.concat(&y, &soft, 2)?;
            y21_in = Some(soft);
        }
        let out = run(be, iters, DecoderAxis::Column, &y22_in)?;
        let y2 = be.reshape(&out, &[b, f * n1, k2])?;
        let y2 = be.permute(&y2, &[0, 2, 1])?;
        let y1 = run(be, iters, DecoderAxis::Row, &y2)?;
        be.reshape(&y1, &[b, k1 * k2])
    }

    pub fn encode(&self, messages: &MessageBatch) -> Result<Tensor> {
        self.encode_with(&mut Eager, &messages.to_symbols(), false)
    }

    pub fn decode_logits(&self, received: &Tensor) -> Result<Tensor> {
        self.decode_with(&mut Eager, received, DecoderTraining::Frozen)
    }

    pub fn decode(&self, received: &Tensor) -> Result<MessageBatch> {
        Ok(hard_decision(&self.decode_logits(received)?))
    }
}

impl ParamStore for ProductAeModel {
    fn param(&self, id: ParamId) -> &Tensor {
        let (net, local) = self.locate(id);
        let layer = &self.network(net).layers()[local / 2];
        if local % 2 == 0 {
            &layer.weights
        } else {
            &layer.bias
        }
    }

    fn param_mut(&mut self, id: ParamId) -> &mut Tensor {
        let (net, local) = self.locate(id);
        let layer = &mut self.network_mut(net).layers_mut()[local / 2];
        if local % 2 == 0 {
            &mut layer.weights
        } else {
            &mut layer.bias
        }
    }
}
