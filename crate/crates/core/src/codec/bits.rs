use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// `rows x k` binary message words, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageBatch {
    rows: usize,
    k: usize,
    bits: Vec<u8>,
}

impl MessageBatch {
    pub fn new(rows: usize, k: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * k {
            return Err(Error::Shape(format!(
                "{} bits cannot fill {rows} words of length {k}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("message bits must be 0 or 1".into()));
        }
        Ok(Self { rows, k, bits })
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, k: usize, rng: &mut R) -> Self {
        let bits = (0..rows * k).map(|_| rng.random_range(0..2u8)).collect();
        Self { rows, k, bits }
    }

    /// Every one of the `2^k` messages, message index `m` having bit `j`
    /// equal to bit `k-1-j` of `m` (first bit most significant).
    pub fn all(k: usize) -> Self {
        let rows = 1usize << k;
        let bits = (0..rows)
            .flat_map(|m| (0..k).map(move |j| ((m >> (k - 1 - j)) & 1) as u8))
            .collect();
        Self { rows, k, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.k..(r + 1) * self.k]
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            k: self.k,
            bits: self.bits[start * self.k..end * self.k].to_vec(),
        }
    }

    /// `0 -> -1`, `1 -> +1`.
    pub fn to_symbols(&self) -> Tensor {
        Tensor::new(
            &[self.rows, self.k],
            self.bits.iter().map(|&b| 2.0 * b as f64 - 1.0).collect(),
        )
        .expect("message shape")
    }

    /// Loss targets in {0, 1}.
    pub fn to_targets(&self) -> Tensor {
        Tensor::new(&[self.rows, self.k], self.bits.iter().map(|&b| b as f64).collect()).expect("message shape")
    }

    /// Bit errors per row against `other`.
    pub fn row_errors(&self, other: &MessageBatch) -> Vec<usize> {
        assert_eq!((self.rows, self.k), (other.rows, other.k));
        self.bits
            .chunks(self.k)
            .zip(other.bits.chunks(self.k))
            .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
            .collect()
    }
}

/// Maps binary values to `2u - 1`.
pub fn bits_to_symbols(bits: &[u8]) -> Result<Vec<f64>> {
    bits.iter()
        .map(|&b| match b {
            0 => Ok(-1.0),
            1 => Ok(1.0),
            other => Err(Error::InvalidInput(format!("{other} is not a bit"))),
        })
        .collect()
}

/// `1` iff the logit is strictly positive.
pub fn hard_decision(logits: &Tensor) -> MessageBatch {
    let k = logits.last_dim();
    let bits = logits.data().iter().map(|&x| (x > 0.0) as u8).collect();
    MessageBatch {
        rows: logits.leading(),
        k,
        bits,
    }
}
