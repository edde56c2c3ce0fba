use crate::codec::MessageBatch;
use crate::error::{Error, Result};

/// Largest message length accepted by exhaustive decoding.
pub const MAX_ML_K: usize = 16;

/// Exhaustive minimum-Euclidean-distance decoder over a codebook of all `2^k`
/// messages (index order is MSB-first message order).
#[derive(Clone, Debug, PartialEq)]
pub struct MlDecoder {
    k: usize,
    n: usize,
    codebook: Vec<f64>,
}

impl MlDecoder {
    /// Builds the codebook from `encode`, which maps a message to its `n`
    /// transmitted symbols.
    pub fn new(k: usize, mut encode: impl FnMut(&[u8]) -> Result<Vec<f64>>) -> Result<Self> {
        if k > MAX_ML_K {
            return Err(Error::TooLargeToEnumerate { k, limit: MAX_ML_K });
        }
        let messages = MessageBatch::all(k);
        let mut codebook = Vec::new();
        let mut n = 0;
        for r in 0..messages.rows() {
            let word = encode(messages.row(r))?;
            if r == 0 {
                n = word.len();
            } else if word.len() != n {
                return Err(Error::Shape("codewords of different lengths".into()));
            }
            codebook.extend(word);
        }
        Ok(Self { k, n, codebook })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn codeword(&self, index: usize) -> &[f64] {
        &self.codebook[index * self.n..(index + 1) * self.n]
    }

    /// Index of the nearest codeword; the smallest index wins ties.
    pub fn decode_index(&self, y: &[f64]) -> Result<usize> {
        if y.len() != self.n {
            return Err(Error::Shape(format!("{} observations for n = {}", y.len(), self.n)));
        }
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.codebook.chunks(self.n).enumerate() {
            let d: f64 = c.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    pub fn decode(&self, y: &[f64]) -> Result<Vec<u8>> {
        let index = self.decode_index(y)?;
        Ok((0..self.k).map(|b| ((index >> (self.k - 1 - b)) & 1) as u8).collect())
    }
}
