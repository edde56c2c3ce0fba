//! Real-valued channel simulation: AWGN and fast (per-symbol) Rayleigh fading.
//!
//! The SNR is `1/sigma^2` for unit average symbol power, so `sigma =
//! 10^(-snr_db/20)`. Fading amplitudes have `E[alpha^2] = 1` and are drawn as
//! `alpha = sqrt(u^2 + v^2)` with `u, v ~ N(0, 1/2)`. The decoder never sees
//! the fading coefficients.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub fn snr_db_to_sigma(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

pub fn sigma_to_snr_db(sigma: f64) -> f64 {
    -20.0 * sigma.log10()
}

/// SNR used to draw the noise of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrPolicy {
    /// One SNR (dB) for every row.
    Point(f64),
    /// Each row draws its SNR uniformly in `[lo, hi]` dB.
    Range { lo: f64, hi: f64 },
}

impl SnrPolicy {
    pub fn range(lo: f64, hi: f64) -> Result<Self> {
        let p = SnrPolicy::Range { lo, hi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SnrPolicy::Point(db) if db.is_nan() => Err(Error::Config("SNR is NaN".into())),
            SnrPolicy::Range { lo, hi } if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() => {
                Err(Error::Config(format!("SNR range [{lo}, {hi}] needs finite lo <= hi")))
            }
            _ => Ok(()),
        }
    }

    /// Shifts the policy by `delta` dB.
    pub fn shifted(self, delta: f64) -> Self {
        match self {
            SnrPolicy::Point(db) => SnrPolicy::Point(db + delta),
            SnrPolicy::Range { lo, hi } => SnrPolicy::Range {
                lo: lo + delta,
                hi: hi + delta,
            },
        }
    }

    /// Per-row SNRs in dB, row 0 first. A degenerate range consumes no randomness.
    pub fn draw_rows<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            SnrPolicy::Point(db) => vec![db; rows],
            SnrPolicy::Range { lo, hi } if lo == hi => vec![lo; rows],
            SnrPolicy::Range { lo, hi } => (0..rows).map(|_| rng.random_range(lo..=hi)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        })
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            other => Err(Error::Config(format!("unknown channel kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub snr: SnrPolicy,
    pub seed: u64,
}

/// One draw of channel randomness for a `rows x cols` batch, kept in unit form
/// so the same realization can be replayed at another SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw {
    pub fading: Option<Tensor>,
    pub unit_noise: Tensor,
    pub row_snr_db: Vec<f64>,
}

impl ChannelDraw {
    /// Draws fading (if any), then row SNRs, then standard-normal noise.
    pub fn sample<R: Rng + ?Sized>(
        kind: ChannelKind,
        policy: &SnrPolicy,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Self {
        let fading = match kind {
            ChannelKind::Awgn => None,
            ChannelKind::Rayleigh => Some(Tensor::new(&[rows, cols], sample_fading(rows * cols, rng)).unwrap()),
        };
        let row_snr_db = policy.draw_rows(rows, rng);
        let unit_noise = Tensor::from_fn(&[rows, cols], |_| rng.sample::<f64, _>(StandardNormal));
        Self {
            fading,
            unit_noise,
            row_snr_db,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_snr_db.len()
    }

    /// The same draw with every row at `snr_db`.
    pub fn at_snr(&self, snr_db: f64) -> Self {
        Self {
            fading: self.fading.clone(),
            unit_noise: self.unit_noise.clone(),
            row_snr_db: vec![snr_db; self.rows()],
        }
    }

    /// Noise scaled by each row's sigma.
    pub fn noise(&self) -> Tensor {
        let cols = self.unit_noise.last_dim();
        let mut n = self.unit_noise.clone();
        for (row, &db) in n.data_mut().chunks_mut(cols).zip(&self.row_snr_db) {
            let sigma = snr_db_to_sigma(db);
            row.iter_mut().for_each(|z| *z *= sigma);
        }
        n
    }

    pub fn rows_slice(&self, start: usize, end: usize) -> Self {
        Self {
            fading: self.fading.as_ref().map(|f| f.slice_rows(start, end)),
            unit_noise: self.unit_noise.slice_rows(start, end),
            row_snr_db: self.row_snr_db[start..end].to_vec(),
        }
    }

    /// `y = alpha * c + n` (AWGN: `alpha = 1`).
    pub fn apply(&self, codewords: &Tensor) -> Result<Tensor> {
        let noise = self.noise();
        let faded = match &self.fading {
            Some(alpha) => codewords.zip_map(alpha, |c, a| c * a)?,
            None => codewords.clone(),
        };
        faded.zip_map(&noise, |c, n| c + n)
    }
}

/// Rayleigh amplitudes with `E[alpha^2] = 1`.
pub fn sample_fading<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let u: f64 = rng.sample::<f64, _>(StandardNormal) * s;
            let v: f64 = rng.sample::<f64, _>(StandardNormal) * s;
            u.hypot(v)
        })
        .collect()
}

pub fn awgn_transmit<R: Rng + ?Sized>(codewords: &Tensor, policy: &SnrPolicy, rng: &mut R) -> Result<Tensor> {
    transmit(ChannelKind::Awgn, codewords, policy, rng)
}

pub fn rayleigh_transmit<R: Rng + ?Sized>(codewords: &Tensor, policy: &SnrPolicy, rng: &mut R) -> Result<Tensor> {
    transmit(ChannelKind::Rayleigh, codewords, policy, rng)
}

/// Passes a `B x n` batch of codewords through the channel.
pub fn transmit<R: Rng + ?Sized>(
    kind: ChannelKind,
    codewords: &Tensor,
    policy: &SnrPolicy,
    rng: &mut R,
) -> Result<Tensor> {
    if !codewords.all_finite() {
        return Err(Error::InvalidInput("codewords must be finite".into()));
    }
    let draw = ChannelDraw::sample(kind, policy, codewords.leading(), codewords.last_dim(), rng);
    draw.apply(codewords)
}
