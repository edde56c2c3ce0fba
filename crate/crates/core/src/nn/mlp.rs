use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::functions::selu;
use crate::nn::tensor::matmul_transb;
use crate::nn::Tensor;

/// Affine map `y = W x + b` with `W` stored `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    /// Weights uniform in `±sqrt(1/in_dim)`, bias zero.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let weights = Tensor::from_fn(&[out_dim, in_dim], |_| rng.random_range(-bound..=bound));
        Self {
            weights,
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn from_parts(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 || bias.shape() != [weights.shape()[0]] {
            return Err(Error::Shape(format!(
                "weights {:?} and bias {:?} do not form a layer",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    /// Applies the layer to every trailing-axis vector of `x`.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (rows, din, dout) = (x.leading(), self.in_dim(), self.out_dim());
        debug_assert_eq!(x.last_dim(), din);
        let mut out = vec![0.0; rows * dout];
        matmul_transb(x.data(), self.weights.data(), rows, din, dout, &mut out);
        for row in out.chunks_mut(dout) {
            for (o, b) in row.iter_mut().zip(self.bias.data()) {
                *o += b;
            }
        }
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = dout;
        Tensor::new(&shape, out).expect("dense output shape")
    }
}

/// Fully-connected stack: SELU after every hidden layer, nothing after the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// `hidden_count` hidden layers of width `hidden_width` between `in_dim` and `out_dim`.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        hidden_width: usize,
        hidden_count: usize,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![in_dim];
        dims.extend(std::iter::repeat_n(hidden_width, hidden_count));
        dims.push(out_dim);
        Self::from_dims(&dims, rng)
    }

    pub fn from_dims<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims.windows(2).map(|w| DenseLayer::init(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// `[in, hidden.., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(DenseLayer::out_dim));
        d
    }

    /// Number of parameter tensors (weights and bias per layer).
    pub fn tensor_count(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            if x.last_dim() != layer.in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} expects trailing axis {} but got {:?}",
                    layer.in_dim(),
                    x.shape()
                )));
            }
            x = layer.forward(&x);
            if i < last {
                x.data_mut().iter_mut().for_each(|v| *v = selu(*v));
            }
        }
        Ok(x)
    }
}
