use serde::{Deserialize, Serialize};

use crate::channel::SnrPolicy;
use crate::error::{Error, Result};

/// How the decoder schedules of one epoch are composed. The encoder schedule
/// always comes last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// One full-decoder schedule of `decoder_iters`.
    Joint,
    /// One schedule per decoder pair, pair `i` trained alone for `pair_iters[i]`.
    SchemeI,
    /// A full-decoder schedule of `start_iters`, then the per-pair schedules.
    SchemeII { start_iters: usize },
    /// As `SchemeII`, followed by another full-decoder schedule of `end_iters`.
    SchemeIII { start_iters: usize, end_iters: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchPolicy {
    /// New messages for every iteration.
    FreshPerIteration,
    /// One message batch per epoch, shared by all its iterations (noise stays fresh).
    FreshPerEpoch,
}

/// Virtual batch of `sub_batches * sub_batch_size` words built by gradient accumulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTunePlan {
    pub sub_batches: usize,
    pub sub_batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub reset_moments: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub snrs_db: Vec<f64>,
    pub words: usize,
    /// Grid SNR whose BER picks the reported checkpoint.
    pub criterion_snr_db: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub encoder_iters: usize,
    pub decoder_iters: usize,
    pub encoder_snr: SnrPolicy,
    pub decoder_snr: SnrPolicy,
    pub lr_enc: f64,
    pub lr_dec: f64,
    pub schedule: Schedule,
    /// Per-pair iterations for the multi-schedule variants; empty means
    /// `decoder_iters` for every pair.
    #[serde(default)]
    pub pair_iters: Vec<usize>,
    pub batch_policy: BatchPolicy,
    #[serde(default)]
    pub fine_tune: Option<FineTunePlan>,
    /// Coefficient of the squared-norm penalty on encoder weights, applied in
    /// encoder iterations only.
    #[serde(default)]
    pub l2: f64,
    pub validation: ValidationConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// Full-size defaults around encoder training SNR `gamma_db`: `B = 5000`,
    /// `T_enc = 100`, `T_dec = 500`, learning rate `2e-4`, decoder SNR range
    /// `[gamma - 2.5, gamma + 1]`.
    pub fn full_size(gamma_db: f64, epochs: usize) -> Self {
        Self {
            epochs,
            batch_size: 5000,
            encoder_iters: 100,
            decoder_iters: 500,
            encoder_snr: SnrPolicy::Point(gamma_db),
            decoder_snr: SnrPolicy::Range {
                lo: gamma_db - 2.5,
                hi: gamma_db + 1.0,
            },
            lr_enc: 2e-4,
            lr_dec: 2e-4,
            schedule: Schedule::Joint,
            pair_iters: Vec::new(),
            batch_policy: BatchPolicy::FreshPerIteration,
            fine_tune: None,
            l2: 0.0,
            validation: ValidationConfig {
                snrs_db: vec![gamma_db, gamma_db + 1.0, gamma_db + 2.0],
                words: 500_000,
                criterion_snr_db: gamma_db + 2.0,
                seed: 1,
            },
            seed: 0,
        }
    }

    pub fn validate(&self, iterations: usize) -> Result<()> {
        self.encoder_snr.validate()?;
        self.decoder_snr.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.lr_enc > 0.0 && self.lr_dec > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !self.pair_iters.is_empty() && self.pair_iters.len() != iterations {
            return Err(Error::Config(format!(
                "{} per-pair iteration counts for {iterations} decoder pairs",
                self.pair_iters.len()
            )));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config("l2 coefficient must be non-negative".into()));
        }
        if let Some(ft) = &self.fine_tune {
            if ft.sub_batches == 0 || ft.sub_batch_size == 0 {
                return Err(Error::Config("fine-tune sub-batch plan must be positive".into()));
            }
        }
        let v = &self.validation;
        if v.words == 0 || v.snrs_db.is_empty() {
            return Err(Error::Config("validation needs at least one word and one SNR".into()));
        }
        if !v.snrs_db.iter().any(|&s| same_snr(s, v.criterion_snr_db)) {
            return Err(Error::SnrNotInGrid(v.criterion_snr_db));
        }
        Ok(())
    }

    /// Iterations of decoder pair `i` (1-based) in the per-pair schedules.
    pub fn pair_iterations(&self, i: usize) -> usize {
        self.pair_iters.get(i - 1).copied().unwrap_or(self.decoder_iters)
    }
}

pub(crate) fn same_snr(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}
