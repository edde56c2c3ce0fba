use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer shape of one fully-connected network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetShape {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl NetShape {
    pub const fn new(hidden_layers: usize, hidden_width: usize) -> Self {
        Self {
            hidden_layers,
            hidden_width,
        }
    }
}

/// Two-dimensional product autoencoder: `C1 = (n1, k1)` on rows,
/// `C2 = (n2, k2)` on columns, `iterations` decoder pairs each exchanging
/// `features` soft vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductAeSpec {
    pub n1: usize,
    pub k1: usize,
    pub n2: usize,
    pub k2: usize,
    pub iterations: usize,
    pub features: usize,
    pub encoder1: NetShape,
    pub encoder2: NetShape,
    pub decoder: NetShape,
    /// The final `(D2, D1)` pair.
    pub last_pair: NetShape,
    #[serde(default)]
    pub normalize_after_first_encoder: bool,
}

impl ProductAeSpec {
    /// Full-size architecture: 7 hidden layers of 200 (encoders) and 250
    /// (decoders), 9 for the last decoder pair, `I = 4`, `F = 3`.
    pub fn full_size(n1: usize, k1: usize, n2: usize, k2: usize) -> Self {
        Self {
            n1,
            k1,
            n2,
            k2,
            iterations: 4,
            features: 3,
            encoder1: NetShape::new(7, 200),
            encoder2: NetShape::new(7, 200),
            decoder: NetShape::new(7, 250),
            last_pair: NetShape::new(9, 250),
            normalize_after_first_encoder: false,
        }
    }

    /// Same hidden shape for every network.
    pub fn uniform(
        (n1, k1): (usize, usize),
        (n2, k2): (usize, usize),
        iterations: usize,
        features: usize,
        hidden: NetShape,
    ) -> Self {
        Self {
            n1,
            k1,
            n2,
            k2,
            iterations,
            features,
            encoder1: hidden,
            encoder2: hidden,
            decoder: hidden,
            last_pair: hidden,
            normalize_after_first_encoder: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn k(&self) -> usize {
        self.k1 * self.k2
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    /// `(n1,k1)x(n2,k2)`.
    pub fn name(&self) -> String {
        format!("({},{})x({},{})", self.n1, self.k1, self.n2, self.k2)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.n1, self.k1, self.n2, self.k2];
        if dims.contains(&0) || self.iterations == 0 || self.features == 0 {
            return Err(Error::Config(format!(
                "code dims {dims:?}, I = {}, F = {} must all be positive",
                self.iterations, self.features
            )));
        }
        for s in [self.encoder1, self.encoder2, self.decoder, self.last_pair] {
            if s.hidden_layers > 0 && s.hidden_width == 0 {
                return Err(Error::Config("hidden width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Which component axis a decoder network works on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoderAxis {
    /// `D2`, along the length-`n2` axis.
    Column,
    /// `D1`, along the length-`n1` axis.
    Row,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderIo {
    /// 1-based iteration index.
    pub iteration: usize,
    pub axis: DecoderAxis,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DecoderIo {
    pub fn name(&self) -> String {
        match self.axis {
            DecoderAxis::Column => format!("D2^({})", self.iteration),
            DecoderAxis::Row => format!("D1^({})", self.iteration),
        }
    }
}

/// Input and output widths of every decoder network in decoding order
/// `D2^(1), D1^(1), ..., D2^(I), D1^(I)`.
pub fn decoder_io_sizes(spec: &ProductAeSpec) -> Vec<DecoderIo> {
    let (n1, k1, n2, k2) = (spec.n1, spec.k1, spec.n2, spec.k2);
    let (iters, f) = (spec.iterations, spec.features);
    let mut table = Vec::with_capacity(2 * iters);
    for i in 1..=iters {
        let last = i == iters;
        let d2_in = if i == 1 { n2 } else { (f + 1) * n2 };
        let d2_out = if last { f * k2 } else { f * n2 };
        table.push(DecoderIo {
            iteration: i,
            axis: DecoderAxis::Column,
            in_dim: d2_in,
            out_dim: d2_out,
        });
        let (d1_in, d1_out) = if last { (f * n1, k1) } else { ((f + 1) * n1, f * n1) };
        table.push(DecoderIo {
            iteration: i,
            axis: DecoderAxis::Row,
            in_dim: d1_in,
            out_dim: d1_out,
        });
    }
    table
}
