//! Cross-channel experiments: evaluating a model on a channel it was not
//! trained on, and adapting it to a new channel with a few epochs.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKind, SnrPolicy};
use crate::codec::ProductAeModel;
use crate::error::{Error, Result};
use crate::eval::sweep::{monte_carlo_sweep, StopRule, SweepResult};
use crate::training::{Discard, TrainConfig, TrainHistory, Trainer};

/// Encoder SNR offset of the robustness fine-tune relative to the base model.
pub const ROBUSTNESS_SHIFT_DB: f64 = 2.75;
/// Decoder range of a widened fine-tune, relative to its encoder SNR.
pub const WIDE_RANGE_BELOW_DB: f64 = 3.0;
pub const WIDE_RANGE_ABOVE_DB: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sweep,
    Robustness,
    Adaptivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    /// Checkpoint holding the source model.
    pub checkpoint: String,
    pub train_channel: ChannelKind,
    pub test_channel: ChannelKind,
    /// Fine-tune epochs; required positive for adaptivity, optional for robustness.
    #[serde(default)]
    pub fine_tune_epochs: usize,
    pub snrs_db: Vec<f64>,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default = "one")]
    pub shards: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        crate::eval::sweep::validate_grid(&self.snrs_db)?;
        self.stop.validate()?;
        if self.kind == ExperimentKind::Adaptivity && self.fine_tune_epochs == 0 {
            return Err(Error::Config("adaptivity needs at least one fine-tune epoch".into()));
        }
        if self.shards == 0 {
            return Err(Error::Config("shard count must be positive".into()));
        }
        Ok(())
    }
}

/// Training SNRs shifted up by `shift_db` with the decoder range widened to
/// `[gamma - 3, gamma + 2]` around the new encoder SNR `gamma`.
pub fn widened_snrs(base: &TrainConfig, shift_db: f64) -> (SnrPolicy, SnrPolicy) {
    let gamma = match base.encoder_snr {
        SnrPolicy::Point(g) => g,
        SnrPolicy::Range { lo, hi } => 0.5 * (lo + hi),
    } + shift_db;
    (
        SnrPolicy::Point(gamma),
        SnrPolicy::Range {
            lo: gamma - WIDE_RANGE_BELOW_DB,
            hi: gamma + WIDE_RANGE_ABOVE_DB,
        },
    )
}

fn fine_tune_model(
    model: &ProductAeModel,
    cfg: &TrainConfig,
    channel: ChannelKind,
    epochs: usize,
) -> Result<(ProductAeModel, TrainHistory)> {
    let mut cfg = cfg.clone();
    cfg.epochs = epochs;
    let mut trainer = Trainer::resume(model.clone(), None, cfg, channel, 1)?;
    trainer.keep_optimizer_state(false);
    let history = trainer.run(&mut Discard)?;
    Ok((trainer.into_model(), history))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub on_train_channel: SweepResult,
    pub on_test_channel: SweepResult,
    /// Present when a widened-SNR fine-tune on the training channel was requested.
    pub fine_tuned: Option<FineTunedReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FineTunedReport {
    pub model: ProductAeModel,
    pub history: TrainHistory,
    pub on_train_channel: SweepResult,
    pub on_test_channel: SweepResult,
}

/// Evaluates `model` unchanged on its training channel and on `test`; if
/// `fine_tune` is given, also fine-tunes a copy on the training channel with
/// that config and evaluates it on both.
#[allow(clippy::too_many_arguments)]
pub fn robustness_experiment(
    model: &ProductAeModel,
    train: ChannelKind,
    test: ChannelKind,
    snrs_db: &[f64],
    stop: &StopRule,
    seed: u64,
    shards: usize,
    fine_tune: Option<(&TrainConfig, usize)>,
) -> Result<RobustnessReport> {
    let sweep = |m: &ProductAeModel, ch| monte_carlo_sweep(m, ch, snrs_db, stop, seed, shards);
    let on_train_channel = sweep(model, train)?;
    let on_test_channel = if test == train {
        on_train_channel.clone()
    } else {
        sweep(model, test)?
    };
    let fine_tuned = match fine_tune {
        None => None,
        Some((cfg, epochs)) => {
            let (tuned, history) = fine_tune_model(model, cfg, train, epochs)?;
            Some(FineTunedReport {
                on_train_channel: sweep(&tuned, train)?,
                on_test_channel: sweep(&tuned, test)?,
                model: tuned,
                history,
            })
        }
    };
    Ok(RobustnessReport {
        on_train_channel,
        on_test_channel,
        fine_tuned,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptivityReport {
    pub before_new: SweepResult,
    pub before_old: SweepResult,
    pub after_new: SweepResult,
    pub after_old: SweepResult,
    pub adapted: ProductAeModel,
    pub history: TrainHistory,
}

/// Trains `model` for `epochs` epochs on `new` with `cfg` and sweeps both
/// channels before and after. All four sweeps share the seed, so before and
/// after see the same messages and noise.
#[allow(clippy::too_many_arguments)]
pub fn adaptivity_experiment(
    model: &ProductAeModel,
    old: ChannelKind,
    new: ChannelKind,
    cfg: &TrainConfig,
    epochs: usize,
    snrs_db: &[f64],
    stop: &StopRule,
    seed: u64,
    shards: usize,
) -> Result<AdaptivityReport> {
    if epochs == 0 {
        return Err(Error::Config("adaptivity needs at least one fine-tune epoch".into()));
    }
    let sweep = |m: &ProductAeModel, ch| monte_carlo_sweep(m, ch, snrs_db, stop, seed, shards);
    let before_new = sweep(model, new)?;
    let before_old = sweep(model, old)?;
    let (adapted, history) = fine_tune_model(model, cfg, new, epochs)?;
    Ok(AdaptivityReport {
        before_new,
        before_old,
        after_new: sweep(&adapted, new)?,
        after_old: sweep(&adapted, old)?,
        adapted,
        history,
    })
}
