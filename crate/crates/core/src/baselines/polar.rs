//! Punctured polar codes with successive-cancellation decoding.
//!
//! Bits are in natural order: the codeword is `x = u * F^{⊗m}` with
//! `F = [[1,0],[1,1]]`, computed by butterflies `(a, b) -> (a ^ b, b)`.
//! BPSK maps bit 0 to +1, so the channel LLR is `2y / sigma^2`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::snr_db_to_sigma;
use crate::error::{Error, Result};
use crate::rng::substream;

/// LLR magnitude cap inside the decoder.
const LLR_CLAMP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub design_snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    /// Genie-aided error rate of each bit channel, natural order.
    pub bit_channel_ber: Vec<f64>,
}

impl ConstructionRecord {
    /// Set when the estimates cannot rank the channels at all.
    pub fn warning(&self) -> Option<String> {
        self.bit_channel_ber.iter().all(|&b| b == 0.0).then(|| {
            format!(
                "all {} bit-channel estimates are zero after {} trials at {} dB; the information set is ordered by index only",
                self.bit_channel_ber.len(),
                self.trials,
                self.design_snr_db
            )
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    /// Mother length `N = 2^m0`.
    pub mother_len: usize,
    pub n: usize,
    pub k: usize,
    /// Sorted information positions.
    pub info_set: Vec<usize>,
    /// Sorted punctured codeword positions, `N - n` of them.
    pub punctured: Vec<usize>,
    #[serde(default)]
    pub construction: Option<ConstructionRecord>,
}

impl PolarSpec {
    pub fn new(n: usize, k: usize, mut info_set: Vec<usize>, mut punctured: Vec<usize>) -> Result<Self> {
        info_set.sort_unstable();
        punctured.sort_unstable();
        let spec = Self {
            mother_len: mother_length(n)?,
            n,
            k,
            info_set,
            punctured,
            construction: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let big_n = self.mother_len;
        if self.n == 0 || big_n != mother_length(self.n)? {
            return Err(Error::Config(format!(
                "mother length {big_n} does not match n = {}",
                self.n
            )));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::Config(format!("need 0 < k <= n, got k = {}", self.k)));
        }
        let strictly_sorted = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if self.info_set.len() != self.k
            || !strictly_sorted(&self.info_set)
            || self.info_set.iter().any(|&i| i >= big_n)
        {
            return Err(Error::Config(
                "information set must hold k distinct indices below N".into(),
            ));
        }
        if self.punctured.len() != big_n - self.n
            || !strictly_sorted(&self.punctured)
            || self.punctured.iter().any(|&i| i >= big_n)
        {
            return Err(Error::Config(
                "puncture pattern must hold N - n distinct positions".into(),
            ));
        }
        Ok(())
    }

    pub fn frozen_mask(&self) -> Vec<bool> {
        let mut frozen = vec![true; self.mother_len];
        for &i in &self.info_set {
            frozen[i] = false;
        }
        frozen
    }

    fn kept_mask(&self) -> Vec<bool> {
        let mut kept = vec![true; self.mother_len];
        for &p in &self.punctured {
            kept[p] = false;
        }
        kept
    }

    /// Mother codeword bits (length `N`) of `k` information bits.
    pub fn encode_bits(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::Shape(format!("{} bits for k = {}", info.len(), self.k)));
        }
        let mut u = vec![0u8; self.mother_len];
        for (&pos, &b) in self.info_set.iter().zip(info) {
            u[pos] = b & 1;
        }
        polar_transform(&mut u);
        Ok(u)
    }

    /// Transmitted BPSK symbols (length `n`): punctured positions removed.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<f64>> {
        let x = self.encode_bits(info)?;
        Ok(x.iter()
            .zip(self.kept_mask())
            .filter(|(_, keep)| *keep)
            .map(|(&b, _)| if b == 0 { 1.0 } else { -1.0 })
            .collect())
    }

    /// Mother-length LLRs from `n` AWGN observations, zero at punctured positions.
    pub fn channel_llrs(&self, y: &[f64], sigma: f64) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::Shape(format!("{} observations for n = {}", y.len(), self.n)));
        }
        let scale = 2.0 / (sigma * sigma);
        let mut obs = y.iter();
        Ok(self
            .kept_mask()
            .into_iter()
            .map(|keep| if keep { scale * obs.next().unwrap() } else { 0.0 })
            .collect())
    }

    /// Successive-cancellation decoding of mother-length `llrs`.
    pub fn sc_decode(&self, llrs: &[f64]) -> Result<Vec<u8>> {
        if llrs.len() != self.mother_len {
            return Err(Error::Shape(format!("{} LLRs for N = {}", llrs.len(), self.mother_len)));
        }
        let frozen = self.frozen_mask();
        let u = sc_run(llrs, &mut |i, llr| if frozen[i] { 0 } else { decide(llr) });
        Ok(self.info_set.iter().map(|&i| u[i]).collect())
    }
}

/// Smallest power of two `>= n`.
pub fn mother_length(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidInput("polar length must be positive".into()));
    }
    Ok(n.next_power_of_two())
}

/// In-place `x = u * F^{⊗m}` over GF(2). Its own inverse.
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    assert!(n.is_power_of_two(), "polar transform needs a power-of-two length");
    let mut half = 1;
    while half < n {
        for block in bits.chunks_mut(2 * half) {
            let (a, b) = block.split_at_mut(half);
            for (x, &y) in a.iter_mut().zip(b.iter()) {
                *x ^= y;
            }
        }
        half *= 2;
    }
}

fn decide(llr: f64) -> u8 {
    (llr < 0.0) as u8
}

/// Exact check-node combination in overflow-free form.
pub fn boxplus(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    sign * a.abs().min(b.abs()) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Runs the SC recursion; `leaf(i, llr)` returns the bit fixed at position `i`.
fn sc_run(llrs: &[f64], leaf: &mut dyn FnMut(usize, f64) -> u8) -> Vec<u8> {
    let n = llrs.len();
    let mut u = vec![0u8; n];
    let mut x = vec![0u8; n];
    let mut scratch = vec![0.0; n];
    let clamped: Vec<f64> = llrs.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
    sc_node(&clamped, 0, &mut scratch, &mut u, &mut x, leaf);
    u
}

fn sc_node(
    llr: &[f64],
    offset: usize,
    scratch: &mut [f64],
    u: &mut [u8],
    x: &mut [u8],
    leaf: &mut dyn FnMut(usize, f64) -> u8,
) {
    let len = llr.len();
    if len == 1 {
        let bit = leaf(offset, llr[0]);
        u[0] = bit;
        x[0] = bit;
        return;
    }
    let half = len / 2;
    let (cur, rest) = scratch.split_at_mut(half);
    for i in 0..half {
        cur[i] = boxplus(llr[i], llr[i + half]);
    }
    let (u_left, u_right) = u.split_at_mut(half);
    let (x_left, x_right) = x.split_at_mut(half);
    sc_node(cur, offset, rest, u_left, x_left, leaf);
    for i in 0..half {
        let a = llr[i];
        cur[i] = llr[i + half] + if x_left[i] == 1 { -a } else { a };
    }
    sc_node(cur, offset + half, rest, u_right, x_right, leaf);
    for i in 0..half {
        x_left[i] ^= x_right[i];
    }
}

/// Uniformly random `(N - n)`-subset of the `N` codeword positions, sorted.
pub fn random_puncture(mother_len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > mother_len {
        return Err(Error::InvalidInput(format!(
            "cannot keep {n} of {mother_len} positions"
        )));
    }
    let mut rng = substream(seed, "polar-puncture", 0);
    let mut p = sample(&mut rng, mother_len, mother_len - n).into_vec();
    p.sort_unstable();
    Ok(p)
}

/// Genie-aided bit-channel error rates: the all-zero codeword is sent at
/// `design_snr_db`, punctured positions see LLR 0, and every channel is
/// decided with all earlier bits known. A zero LLR counts as half an error.
pub fn estimate_bit_channels(
    mother_len: usize,
    punctured: &[usize],
    design_snr_db: f64,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let sigma = snr_db_to_sigma(design_snr_db);
    let scale = 2.0 / (sigma * sigma);
    let mut kept = vec![true; mother_len];
    for &p in punctured {
        kept[p] = false;
    }
    let mut rng = substream(seed, "polar-construct", 0);
    let mut errors = vec![0.0; mother_len];
    let mut llrs = vec![0.0; mother_len];
    for _ in 0..trials {
        for (l, &keep) in llrs.iter_mut().zip(&kept) {
            *l = if keep {
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                scale * (1.0 + sigma * noise)
            } else {
                0.0
            };
        }
        sc_run(&llrs, &mut |i, llr| {
            if llr < 0.0 {
                errors[i] += 1.0;
            } else if llr == 0.0 {
                errors[i] += 0.5;
            }
            0
        });
    }
    let t = trials.max(1) as f64;
    errors.iter().map(|e| e / t).collect()
}

/// Picks the `k` bit channels with the smallest estimated error rate (ties
/// to the smaller index) after random puncturing to length `n`.
pub fn construct(n: usize, k: usize, design_snr_db: f64, trials: usize, seed: u64) -> Result<PolarSpec> {
    let big_n = mother_length(n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("need 0 < k <= n, got ({n},{k})")));
    }
    let punctured = random_puncture(big_n, n, seed)?;
    let ber = estimate_bit_channels(big_n, &punctured, design_snr_db, trials, seed);
    let mut order: Vec<usize> = (0..big_n).collect();
    order.sort_by(|&a, &b| ber[a].total_cmp(&ber[b]).then(a.cmp(&b)));
    let mut spec = PolarSpec::new(n, k, order[..k].to_vec(), punctured)?;
    spec.construction = Some(ConstructionRecord {
        design_snr_db,
        trials,
        seed,
        bit_channel_ber: ber,
    });
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_transform() {
        let spec = PolarSpec::new(2, 1, vec![1], vec![]).unwrap();
        assert_eq!(spec.encode_bits(&[1]).unwrap(), vec![1, 1]);
        assert_eq!(spec.encode(&[1]).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn transform_is_an_involution() {
        let mut rng = substream(1, "t", 0);
        let orig: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
        let mut bits = orig.clone();
        polar_transform(&mut bits);
        assert_ne!(bits, orig);
        polar_transform(&mut bits);
        assert_eq!(bits, orig);
    }

    #[test]
    fn boxplus_reference() {
        let exact = |a: f64, b: f64| 2.0 * ((a / 2.0).tanh() * (b / 2.0).tanh()).atanh();
        for (a, b) in [(0.3, -1.2), (2.0, 3.5), (-4.0, -0.1), (0.0, 5.0), (7.0, 7.0)] {
            assert!((boxplus(a, b) - exact(a, b)).abs() < 1e-12, "{a} {b}");
        }
        assert!((boxplus(800.0, -900.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn zero_llrs_follow_the_prior_path() {
        let spec = PolarSpec::new(8, 4, vec![3, 5, 6, 7], vec![]).unwrap();
        assert_eq!(spec.sc_decode(&[0.0; 8]).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn puncture_patterns() {
        assert!(random_puncture(16, 16, 3).unwrap().is_empty());
        assert_eq!(random_puncture(256, 225, 3).unwrap().len(), 31);
        assert_eq!(
            random_puncture(256, 225, 3).unwrap(),
            random_puncture(256, 225, 3).unwrap()
        );
        assert!(random_puncture(8, 9, 0).is_err());
    }

    #[test]
    fn full_rate_construction_keeps_everything() {
        let spec = construct(8, 8, 1.0, 10, 0).unwrap();
        assert_eq!(spec.info_set, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn spec_validation() {
        assert!(PolarSpec::new(8, 2, vec![1, 1], vec![]).is_err());
        assert!(PolarSpec::new(6, 2, vec![6, 7], vec![0]).is_err());
        assert!(PolarSpec::new(6, 2, vec![6, 7], vec![0, 1]).is_ok());
    }
}
