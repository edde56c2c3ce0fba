//! Binary checkpoint files.
//!
//! Layout: the magic `PAE1`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a UTF-8 JSON header, then the payload.
//! The payload holds every parameter tensor as little-endian `f64` in
//! canonical order (`E1` layers first to last, each weights row-major then
//! bias; `E2`; `D2^(1)`, `D1^(1)`, ..., `D2^(I)`, `D1^(I)`). When optimizer
//! state is present it is followed by all first moments and all second
//! moments in the same order, then one little-endian `u64` step counter per
//! optimizer group (encoder, then each decoder pair).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{DecoderPair, ProductAeModel, ProductAeSpec};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, DenseLayer, Mlp, Tensor};
use crate::training::{Checkpoint, Optimizers, ValidationPoint};

pub const MAGIC: [u8; 4] = *b"PAE1";
pub const VERSION: u32 = 1;
const PREAMBLE: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerHeader {
    pub encoder: AdamConfig,
    pub decoder: AdamConfig,
    /// Number of `u64` step counters at the end of the payload.
    pub step_counters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub spec: ProductAeSpec,
    /// Layer widths `[in, hidden..., out]` of every network in canonical order.
    pub layer_dims: Vec<Vec<usize>>,
    pub parameter_count: usize,
    pub optimizer: Option<OptimizerHeader>,
    pub epoch: usize,
    pub seed: u64,
    pub fingerprint: u64,
    pub validation: Vec<ValidationPoint>,
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn checkpoint_to_bytes(ck: &Checkpoint) -> Result<Vec<u8>> {
    let model = &ck.model;
    let spec = model.spec();
    let optimizer = ck.optimizers.as_ref().map(|o| OptimizerHeader {
        encoder: o.encoder.config,
        decoder: o.pairs[0].config,
        step_counters: 1 + o.pairs.len(),
    });
    let header = CheckpointHeader {
        spec: spec.clone(),
        layer_dims: model.networks().map(Mlp::dims).collect(),
        parameter_count: model.param_count(),
        optimizer,
        epoch: ck.epoch,
        seed: ck.seed,
        fingerprint: ck.fingerprint,
        validation: ck.validation.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + 8 * model.param_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in model.parameters() {
        put_f64s(&mut out, t.data());
    }
    if let Some(o) = &ck.optimizers {
        for t in o.all().flat_map(|s| &s.first_moment) {
            put_f64s(&mut out, t.data());
        }
        for t in o.all().flat_map(|s| &s.second_moment) {
            put_f64s(&mut out, t.data());
        }
        for s in o.all() {
            out.extend_from_slice(&s.step_count.to_le_bytes());
        }
    }
    Ok(out)
}

/// Reads fixed-size little-endian values off the front of a slice.
struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn f64s(&mut self, count: usize) -> Vec<f64> {
        let (head, rest) = self.bytes.split_at(8 * count);
        self.bytes = rest;
        head.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    }

    fn u64(&mut self) -> u64 {
        let (head, rest) = self.bytes.split_at(8);
        self.bytes = rest;
        u64::from_le_bytes(head.try_into().unwrap())
    }

    fn tensor(&mut self, shape: &[usize]) -> Tensor {
        let count = shape.iter().product();
        Tensor::new(shape, self.f64s(count)).expect("shape product matches count")
    }
}

fn expected_dims(spec: &ProductAeSpec) -> Vec<(usize, usize, usize, usize)> {
    // (in, out, hidden layers, width) per network, canonical order.
    let mut nets = vec![
        (
            spec.k1,
            spec.n1,
            spec.encoder1.hidden_layers,
            spec.encoder1.hidden_width,
        ),
        (
            spec.k2,
            spec.n2,
            spec.encoder2.hidden_layers,
            spec.encoder2.hidden_width,
        ),
    ];
    for io in crate::codec::decoder_io_sizes(spec) {
        let shape = if io.iteration == spec.iterations {
            spec.last_pair
        } else {
            spec.decoder
        };
        nets.push((io.in_dim, io.out_dim, shape.hidden_layers, shape.hidden_width));
    }
    nets
}

fn check_header(h: &CheckpointHeader) -> Result<()> {
    h.spec
        .validate()
        .map_err(|e| Error::DimMismatch(format!("header spec is invalid: {e}")))?;
    let expected = expected_dims(&h.spec);
    if h.layer_dims.len() != expected.len() {
        return Err(Error::DimMismatch(format!(
            "{} networks listed, the model spec needs {}",
            h.layer_dims.len(),
            expected.len()
        )));
    }
    let mut count = 0;
    for (i, (dims, &(din, dout, layers, width))) in h.layer_dims.iter().zip(&expected).enumerate() {
        let mut want = vec![din];
        want.extend(std::iter::repeat_n(width, layers));
        want.push(dout);
        if *dims != want {
            return Err(Error::DimMismatch(format!(
                "network {i} has widths {dims:?}, the model spec implies {want:?}"
            )));
        }
        count += dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
    }
    if count != h.parameter_count {
        return Err(Error::DimMismatch(format!(
            "header counts {} parameters, the layer widths give {count}",
            h.parameter_count
        )));
    }
    if let Some(o) = &h.optimizer {
        if o.step_counters != h.spec.iterations + 1 {
            return Err(Error::DimMismatch(format!(
                "{} step counters for {} optimizer groups",
                o.step_counters,
                h.spec.iterations + 1
            )));
        }
    }
    Ok(())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 {
        return Err(Error::BadMagic([0; 4]));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < PREAMBLE {
        return Err(Error::HeaderParse("file ends inside the preamble".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|l| PREAMBLE.checked_add(l))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::HeaderParse(format!("header length {header_len} exceeds the file")))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[PREAMBLE..header_end]).map_err(|e| Error::HeaderParse(e.to_string()))?;
    check_header(&header)?;

    let payload = &bytes[header_end..];
    let groups = header.optimizer.as_ref().map_or(0, |o| o.step_counters);
    let copies = if header.optimizer.is_some() { 3 } else { 1 };
    let expected = 8 * header.parameter_count * copies + 8 * groups;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::DimMismatch(format!(
            "{} trailing payload bytes",
            payload.len() - expected
        )));
    }

    let mut reader = Reader { bytes: payload };
    let mut read_net = |dims: &[usize]| -> Result<Mlp> {
        let layers = dims
            .windows(2)
            .map(|w| {
                let weights = reader.tensor(&[w[1], w[0]]);
                let bias = reader.tensor(&[w[1]]);
                DenseLayer::from_parts(weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers)
    };
    let mut nets = header
        .layer_dims
        .iter()
        .map(|d| read_net(d))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let encoder1 = nets.next().unwrap();
    let encoder2 = nets.next().unwrap();
    let mut pairs = Vec::with_capacity(header.spec.iterations);
    while let (Some(column), Some(row)) = (nets.next(), nets.next()) {
        pairs.push(DecoderPair { column, row });
    }
    let model = ProductAeModel::from_parts(header.spec.clone(), encoder1, encoder2, pairs)
        .map_err(|e| Error::DimMismatch(e.to_string()))?;

    let optimizers = match &header.optimizer {
        None => None,
        Some(oh) => {
            let mut o = Optimizers::new(&model, oh.encoder.lr, oh.decoder.lr);
            o.encoder.config = oh.encoder;
            for p in &mut o.pairs {
                p.config = oh.decoder;
            }
            for moments in [0, 1] {
                for state in o.all_mut() {
                    let target = if moments == 0 {
                        &mut state.first_moment
                    } else {
                        &mut state.second_moment
                    };
                    for t in target.iter_mut() {
                        *t = reader.tensor(t.shape());
                    }
                }
            }
            for state in o.all_mut() {
                state.step_count = reader.u64();
            }
            Some(o)
        }
    };
    Ok(Checkpoint {
        epoch: header.epoch,
        model,
        optimizers,
        validation: header.validation,
        seed: header.seed,
        fingerprint: header.fingerprint,
    })
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_to_bytes(ck)?;
    let tmp = path.with_extension("pae.tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
