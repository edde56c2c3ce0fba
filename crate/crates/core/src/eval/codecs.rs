use crate::baselines::{MlDecoder, PolarSpec, ProductCode};
use crate::channel::{snr_db_to_sigma, ChannelKind};
use crate::codec::{MessageBatch, ProductAeModel};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Anything that maps message batches to transmitted symbols and back.
pub trait Codec: Sync {
    fn name(&self) -> String;
    fn k(&self) -> usize;
    fn n(&self) -> usize;
    fn encode_batch(&self, messages: &MessageBatch) -> Result<Tensor>;
    /// Hard decisions from channel outputs observed at `snr_db`.
    fn decode_batch(&self, received: &Tensor, snr_db: f64) -> Result<MessageBatch>;

    fn supports(&self, _channel: ChannelKind) -> bool {
        true
    }
}

impl Codec for ProductAeModel {
    fn name(&self) -> String {
        format!("productae{}", self.spec().name())
    }

    fn k(&self) -> usize {
        self.spec().k()
    }

    fn n(&self) -> usize {
        self.spec().n()
    }

    fn encode_batch(&self, messages: &MessageBatch) -> Result<Tensor> {
        self.encode(messages)
    }

    fn decode_batch(&self, received: &Tensor, _snr_db: f64) -> Result<MessageBatch> {
        self.decode(received)
    }
}

fn bpsk(bits: &[u8]) -> impl Iterator<Item = f64> + '_ {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 })
}

fn rows_of(received: &Tensor, n: usize) -> Result<std::slice::ChunksExact<'_, f64>> {
    if received.shape().len() != 2 || received.last_dim() != n {
        return Err(Error::Shape(format!(
            "expected (B, {n}) observations, got {:?}",
            received.shape()
        )));
    }
    Ok(received.data().chunks_exact(n))
}

/// Hard-decided BPSK without coding (`n = k`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Uncoded {
    pub k: usize,
}

impl Codec for Uncoded {
    fn name(&self) -> String {
        "uncoded".into()
    }

    fn k(&self) -> usize {
        self.k
    }

    fn n(&self) -> usize {
        self.k
    }

    fn encode_batch(&self, messages: &MessageBatch) -> Result<Tensor> {
        Tensor::new(&[messages.rows(), self.k], bpsk(messages.bits()).collect())
    }

    fn decode_batch(&self, received: &Tensor, _snr_db: f64) -> Result<MessageBatch> {
        let _ = rows_of(received, self.k)?;
        let bits = received.data().iter().map(|&y| (y < 0.0) as u8).collect();
        MessageBatch::new(received.leading(), self.k, bits)
    }
}

impl Codec for PolarSpec {
    fn name(&self) -> String {
        format!("polar({},{})", self.n, self.k)
    }

    fn k(&self) -> usize {
        self.k
    }

    fn n(&self) -> usize {
        self.n
    }

    fn encode_batch(&self, messages: &MessageBatch) -> Result<Tensor> {
        let mut data = Vec::with_capacity(messages.rows() * self.n);
        for r in 0..messages.rows() {
            data.extend(self.encode(messages.row(r))?);
        }
        Tensor::new(&[messages.rows(), self.n], data)
    }

    fn decode_batch(&self, received: &Tensor, snr_db: f64) -> Result<MessageBatch> {
        let sigma = snr_db_to_sigma(snr_db);
        let mut bits = Vec::with_capacity(received.leading() * self.k);
        for y in rows_of(received, self.n)? {
            bits.extend(self.sc_decode(&self.channel_llrs(y, sigma)?)?);
        }
        MessageBatch::new(received.leading(), self.k, bits)
    }

    /// LLRs assume a known AWGN channel.
    fn supports(&self, channel: ChannelKind) -> bool {
        channel == ChannelKind::Awgn
    }
}

/// Product code decoded by exhaustive minimum-distance search.
#[derive(Clone, Debug, PartialEq)]
pub struct MlProductCodec {
    code: ProductCode,
    ml: MlDecoder,
}

impl MlProductCodec {
    pub fn new(code: ProductCode) -> Result<Self> {
        let ml = MlDecoder::new(code.k(), |u| Ok(bpsk(&code.encode(u)?).collect()))?;
        Ok(Self { code, ml })
    }

    pub fn code(&self) -> &ProductCode {
        &self.code
    }
}

impl Codec for MlProductCodec {
    fn name(&self) -> String {
        format!("product{}", self.code)
    }

    fn k(&self) -> usize {
        self.code.k()
    }

    fn n(&self) -> usize {
        self.code.n()
    }

    fn encode_batch(&self, messages: &MessageBatch) -> Result<Tensor> {
        let mut data = Vec::with_capacity(messages.rows() * self.n());
        for r in 0..messages.rows() {
            data.extend(self.ml.codeword(message_index(messages.row(r))));
        }
        Tensor::new(&[messages.rows(), self.n()], data)
    }

    fn decode_batch(&self, received: &Tensor, _snr_db: f64) -> Result<MessageBatch> {
        let mut bits = Vec::with_capacity(received.leading() * self.k());
        for y in rows_of(received, self.n())? {
            bits.extend(self.ml.decode(y)?);
        }
        MessageBatch::new(received.leading(), self.k(), bits)
    }
}

/// MSB-first index of a message.
fn message_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::LinearCode;

    #[test]
    fn ml_product_codebook_matches_encoder() {
        let c = LinearCode::single_parity_check(3).unwrap();
        let codec = MlProductCodec::new(ProductCode::new(vec![c.clone(), c]).unwrap()).unwrap();
        let all = MessageBatch::all(4);
        let x = codec.encode_batch(&all).unwrap();
        for r in 0..all.rows() {
            let direct: Vec<f64> = bpsk(&codec.code.encode(all.row(r)).unwrap()).collect();
            assert_eq!(&x.data()[r * 9..(r + 1) * 9], direct.as_slice());
        }
        assert_eq!(codec.decode_batch(&x, 0.0).unwrap(), all);
    }

    #[test]
    fn uncoded_round_trip() {
        let m = MessageBatch::all(3);
        let u = Uncoded { k: 3 };
        assert_eq!(u.decode_batch(&u.encode_batch(&m).unwrap(), 0.0).unwrap(), m);
    }
}
