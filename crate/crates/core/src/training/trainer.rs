//! Alternating encoder/decoder optimization.
//!
//! Each epoch runs the decoder schedules (encoder frozen), then the encoder
//! schedule (decoders frozen). Decoder iterations draw noise from the decoder
//! SNR policy, encoder iterations from the encoder policy. Randomness comes
//! from per-epoch substreams of the configured seed, so a run is fully
//! determined by its config.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDraw, ChannelKind, SnrPolicy};
use crate::codec::{DecoderTraining, MessageBatch, ProductAeModel};
use crate::error::{Error, Result};
use crate::nn::{bce_with_logits, AdamConfig, AdamState, GradientAccumulator, Gradients, ParamStore, Tape};
use crate::rng::substream;
use crate::training::config::{BatchPolicy, FineTunePlan, Schedule, TrainConfig};
use crate::training::validate::{ValidationPoint, ValidationSet};

/// Messages plus the channel realization they will see.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub messages: MessageBatch,
    pub channel: ChannelDraw,
}

impl Sample {
    pub fn draw<R: rand::Rng + ?Sized>(
        kind: ChannelKind,
        policy: &SnrPolicy,
        messages: MessageBatch,
        n: usize,
        noise_rng: &mut R,
    ) -> Self {
        let channel = ChannelDraw::sample(kind, policy, messages.rows(), n, noise_rng);
        Self { messages, channel }
    }

    pub fn rows(&self) -> usize {
        self.messages.rows()
    }

    /// Splits into `parts` consecutive sub-samples of equal size.
    pub fn split(&self, parts: usize) -> Result<Vec<Sample>> {
        let rows = self.rows();
        if parts == 0 || !rows.is_multiple_of(parts) {
            return Err(Error::InvalidInput(format!(
                "{rows} rows cannot be split into {parts} equal parts"
            )));
        }
        let size = rows / parts;
        Ok((0..parts)
            .map(|p| Sample {
                messages: self.messages.slice_rows(p * size, (p + 1) * size),
                channel: self.channel.rows_slice(p * size, (p + 1) * size),
            })
            .collect())
    }
}

/// Which parameters an iteration updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Encoder,
    Decoder,
    /// Decoder pair `i` (1-based) alone.
    Pair(usize),
}

impl Target {
    fn label(self) -> String {
        match self {
            Target::Encoder => "encoder".into(),
            Target::Decoder => "decoder".into(),
            Target::Pair(i) => format!("decoder pair {i}"),
        }
    }
}

/// Mean BCE loss of `sample` through encoder, channel and decoder, and its
/// gradient with respect to the parameters selected by `target`. For encoder
/// iterations `l2 * sum ||phi||^2` over the encoder tensors is added.
pub fn loss_and_gradients(
    model: &ProductAeModel,
    sample: &Sample,
    target: Target,
    l2: f64,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let symbols = tape.constant(sample.messages.to_symbols());
    let codewords = model.encode_with(&mut tape, &symbols, target == Target::Encoder)?;
    let faded = match &sample.channel.fading {
        Some(alpha) => {
            let a = tape.constant(alpha.clone());
            tape.mul(codewords, a)?
        }
        None => codewords,
    };
    let noise = tape.constant(sample.channel.noise());
    let received = tape.add(faded, noise)?;
    let training = match target {
        Target::Encoder => DecoderTraining::Frozen,
        Target::Decoder => DecoderTraining::All,
        Target::Pair(i) => DecoderTraining::Pair(i),
    };
    let logits = model.decode_with(&mut tape, &received, training)?;
    let targets = tape.constant(sample.messages.to_targets());
    let loss = tape.bce_with_logits(logits, targets)?;
    let mut value = tape.value(loss).data()[0];
    let mut grads = tape.backward(loss)?;
    if target == Target::Encoder && l2 > 0.0 {
        for id in model.encoder_ids() {
            let p = model.param(id);
            value += l2 * p.sum_squares();
            let mut penalty = Gradients::default();
            penalty.insert(id, p.map(|w| 2.0 * l2 * w));
            grads.accumulate(&penalty, 1.0);
        }
    }
    Ok((value, grads))
}

/// Loss of `sample` without recording gradients.
pub fn evaluate_loss(model: &ProductAeModel, sample: &Sample) -> Result<f64> {
    let c = model.encode(&sample.messages)?;
    let y = sample.channel.apply(&c)?;
    bce_with_logits(&model.decode_logits(&y)?, &sample.messages.to_targets())
}

/// Adam states: one for the encoders, one per decoder pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub encoder: AdamState,
    pub pairs: Vec<AdamState>,
}

impl Optimizers {
    pub fn new(model: &ProductAeModel, lr_enc: f64, lr_dec: f64) -> Self {
        let encoder = AdamState::new(AdamConfig::with_lr(lr_enc), model, model.encoder_ids());
        let pairs = (1..=model.spec().iterations)
            .map(|i| AdamState::new(AdamConfig::with_lr(lr_dec), model, model.pair_ids(i)))
            .collect();
        Self { encoder, pairs }
    }

    pub fn all(&self) -> impl Iterator<Item = &AdamState> {
        std::iter::once(&self.encoder).chain(&self.pairs)
    }

    pub fn all_mut(&mut self) -> impl Iterator<Item = &mut AdamState> {
        std::iter::once(&mut self.encoder).chain(&mut self.pairs)
    }

    pub fn reset(&mut self) {
        self.all_mut().for_each(AdamState::reset);
    }

    pub fn set_learning_rates(&mut self, lr_enc: f64, lr_dec: f64) {
        self.encoder.config.lr = lr_enc;
        for p in &mut self.pairs {
            p.config.lr = lr_dec;
        }
    }

    fn step(&mut self, model: &mut ProductAeModel, target: Target, grads: &Gradients) -> Result<()> {
        match target {
            Target::Encoder => self.encoder.step(model, grads),
            Target::Decoder => {
                if !grads.all_finite() {
                    return Err(Error::NonFiniteGradient);
                }
                self.pairs.iter_mut().try_for_each(|p| p.step(model, grads))
            }
            Target::Pair(i) => self.pairs[i - 1].step(model, grads),
        }
    }
}

/// Optimizer steps applied, by kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub encoder: usize,
    pub full_decoder: usize,
    pub per_pair: Vec<usize>,
}

impl UpdateCounters {
    pub fn decoder_iterations(&self) -> usize {
        self.full_decoder + self.per_pair.iter().sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub model: ProductAeModel,
    pub optimizers: Option<Optimizers>,
    pub validation: Vec<ValidationPoint>,
    pub seed: u64,
    /// Hash of the training configuration that produced this checkpoint.
    pub fingerprint: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's iterations; `None` for the initial model or
    /// an epoch without iterations.
    pub train_loss: Option<f64>,
    pub validation: Vec<ValidationPoint>,
    pub wall_seconds: f64,
}

/// Append-only, epoch-indexed log of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn push(&mut self, record: EpochRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.epoch > last.epoch, "history is epoch-ordered");
        }
        self.records.push(record);
    }

    pub fn extend(&mut self, other: TrainHistory) {
        for r in other.records {
            self.push(r);
        }
    }
}

/// Receives one checkpoint per epoch.
pub trait CheckpointSink {
    fn accept(&mut self, checkpoint: Checkpoint) -> Result<()>;
}

impl CheckpointSink for Vec<Checkpoint> {
    fn accept(&mut self, checkpoint: Checkpoint) -> Result<()> {
        self.push(checkpoint);
        Ok(())
    }
}

/// Drops every checkpoint.
pub struct Discard;

impl CheckpointSink for Discard {
    fn accept(&mut self, _: Checkpoint) -> Result<()> {
        Ok(())
    }
}

/// Keeps the checkpoint with the lowest validation BER at one SNR, earliest on ties.
#[derive(Debug)]
pub struct KeepBest {
    pub snr_db: f64,
    pub best: Option<Checkpoint>,
}

impl KeepBest {
    pub fn new(snr_db: f64) -> Self {
        Self { snr_db, best: None }
    }
}

impl CheckpointSink for KeepBest {
    fn accept(&mut self, checkpoint: Checkpoint) -> Result<()> {
        let ber = ber_at(&checkpoint.validation, self.snr_db)?;
        let better = match &self.best {
            None => true,
            Some(b) => ber < ber_at(&b.validation, self.snr_db)?,
        };
        if better {
            self.best = Some(checkpoint);
        }
        Ok(())
    }
}

pub fn ber_at(points: &[ValidationPoint], snr_db: f64) -> Result<f64> {
    points
        .iter()
        .find(|p| crate::training::config::same_snr(p.snr_db, snr_db))
        .map(|p| p.stats.ber())
        .ok_or(Error::SnrNotInGrid(snr_db))
}

pub fn config_fingerprint(cfg: &TrainConfig) -> u64 {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    crate::rng::stream_id(std::str::from_utf8(&json).unwrap(), 0)
}

pub struct Trainer {
    model: ProductAeModel,
    optimizers: Optimizers,
    cfg: TrainConfig,
    channel: ChannelKind,
    counters: UpdateCounters,
    validation: ValidationSet,
    next_epoch: usize,
    keep_optimizer_state: bool,
}

impl Trainer {
    pub fn new(model: ProductAeModel, cfg: TrainConfig, channel: ChannelKind) -> Result<Self> {
        let optimizers = Optimizers::new(&model, cfg.lr_enc, cfg.lr_dec);
        Self::resume(model, Some(optimizers), cfg, channel, 0)
    }

    /// Continues from a checkpointed model. Missing optimizer state starts fresh;
    /// epochs are numbered from `first_epoch`.
    pub fn resume(
        model: ProductAeModel,
        optimizers: Option<Optimizers>,
        cfg: TrainConfig,
        channel: ChannelKind,
        first_epoch: usize,
    ) -> Result<Self> {
        cfg.validate(model.spec().iterations)?;
        let mut optimizers = optimizers.unwrap_or_else(|| Optimizers::new(&model, cfg.lr_enc, cfg.lr_dec));
        optimizers.set_learning_rates(cfg.lr_enc, cfg.lr_dec);
        let spec = model.spec();
        let validation = ValidationSet::new(channel, &cfg.validation, spec.k(), spec.n());
        let counters = UpdateCounters {
            per_pair: vec![0; spec.iterations],
            ..Default::default()
        };
        Ok(Self {
            model,
            optimizers,
            cfg,
            channel,
            counters,
            validation,
            next_epoch: first_epoch,
            keep_optimizer_state: true,
        })
    }

    /// Whether emitted checkpoints carry Adam moments.
    pub fn keep_optimizer_state(&mut self, keep: bool) {
        self.keep_optimizer_state = keep;
    }

    pub fn model(&self) -> &ProductAeModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut ProductAeModel {
        &mut self.model
    }

    pub fn into_model(self) -> ProductAeModel {
        self.model
    }

    pub fn optimizers(&self) -> &Optimizers {
        &self.optimizers
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn counters(&self) -> &UpdateCounters {
        &self.counters
    }

    pub fn next_epoch(&self) -> usize {
        self.next_epoch
    }

    pub fn validation_set(&self) -> &ValidationSet {
        &self.validation
    }

    pub fn validate(&self) -> Result<Vec<ValidationPoint>> {
        self.validation.evaluate(&self.model)
    }

    /// One optimizer step on `sample`. Returns the loss before the step.
    pub fn step(&mut self, target: Target, sample: &Sample) -> Result<f64> {
        let (loss, grads) = loss_and_gradients(&self.model, sample, target, self.cfg.l2)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
        self.optimizers.step(&mut self.model, target, &grads)?;
        self.count(target);
        Ok(loss)
    }

    /// One optimizer step on the virtual batch formed by `samples`, all of the
    /// same size, with gradients accumulated and weighted `1/L`.
    pub fn accumulated_step(&mut self, target: Target, samples: &[Sample]) -> Result<f64> {
        let mut acc = GradientAccumulator::new(samples.len());
        let mut loss = 0.0;
        for s in samples {
            let (l, g) = loss_and_gradients(&self.model, s, target, self.cfg.l2)?;
            acc.add(&g, s.rows())?;
            loss += l / samples.len() as f64;
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
        self.optimizers.step(&mut self.model, target, &acc.take())?;
        self.count(target);
        Ok(loss)
    }

    fn count(&mut self, target: Target) {
        match target {
            Target::Encoder => self.counters.encoder += 1,
            Target::Decoder => self.counters.full_decoder += 1,
            Target::Pair(i) => self.counters.per_pair[i - 1] += 1,
        }
    }

    /// Validates the current model and hands a checkpoint to `sink`.
    fn emit(&self, epoch: usize, sink: &mut dyn CheckpointSink) -> Result<Vec<ValidationPoint>> {
        let validation = self.validate()?;
        sink.accept(Checkpoint {
            epoch,
            model: self.model.clone(),
            optimizers: self.keep_optimizer_state.then(|| self.optimizers.clone()),
            validation: validation.clone(),
            seed: self.cfg.seed,
            fingerprint: config_fingerprint(&self.cfg),
        })?;
        Ok(validation)
    }

    /// Runs the configured epochs. A fresh run first reports the untrained
    /// model as epoch 0.
    pub fn run(&mut self, sink: &mut dyn CheckpointSink) -> Result<TrainHistory> {
        let mut history = TrainHistory::default();
        if self.next_epoch == 0 {
            let start = Instant::now();
            let validation = self.emit(0, sink)?;
            history.push(EpochRecord {
                epoch: 0,
                train_loss: None,
                validation,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
            self.next_epoch = 1;
        }
        for _ in 0..self.cfg.epochs {
            let epoch = self.next_epoch;
            let start = Instant::now();
            let loss = self.run_epoch(epoch)?;
            let validation = self.emit(epoch, sink)?;
            history.push(EpochRecord {
                epoch,
                train_loss: loss,
                validation,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
            self.next_epoch += 1;
        }
        Ok(history)
    }

    /// One epoch of the configured schedule. Returns the mean iteration loss.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<Option<f64>> {
        let mut runner = EpochRunner::new(self, epoch, "train", 1);
        let iterations = self.model.spec().iterations;
        let cfg = self.cfg.clone();
        let pairs = |runner: &mut EpochRunner, this: &mut Trainer| -> Result<()> {
            for i in 1..=iterations {
                runner.schedule(this, Target::Pair(i), cfg.pair_iterations(i))?;
            }
            Ok(())
        };
        match cfg.schedule {
            Schedule::Joint => runner.schedule(self, Target::Decoder, cfg.decoder_iters)?,
            Schedule::SchemeI => pairs(&mut runner, self)?,
            Schedule::SchemeII { start_iters } => {
                runner.schedule(self, Target::Decoder, start_iters)?;
                pairs(&mut runner, self)?;
            }
            Schedule::SchemeIII { start_iters, end_iters } => {
                runner.schedule(self, Target::Decoder, start_iters)?;
                pairs(&mut runner, self)?;
                runner.schedule(self, Target::Decoder, end_iters)?;
            }
        }
        runner.schedule(self, Target::Encoder, cfg.encoder_iters)?;
        Ok(runner.mean_loss())
    }

    /// Large-batch fine-tuning: `plan.epochs` joint epochs in which every
    /// iteration accumulates `plan.sub_batches` sub-batches before stepping.
    pub fn fine_tune(&mut self, plan: &FineTunePlan, sink: &mut dyn CheckpointSink) -> Result<TrainHistory> {
        if plan.sub_batches == 0 || plan.sub_batch_size == 0 {
            return Err(Error::Config("fine-tune sub-batch plan must be positive".into()));
        }
        if plan.reset_moments {
            self.optimizers.reset();
        }
        let mut history = TrainHistory::default();
        if self.next_epoch == 0 {
            let validation = self.emit(0, sink)?;
            history.push(EpochRecord {
                epoch: 0,
                train_loss: None,
                validation,
                wall_seconds: 0.0,
            });
            self.next_epoch = 1;
        }
        for _ in 0..plan.epochs {
            let epoch = self.next_epoch;
            let start = Instant::now();
            let mut runner = EpochRunner::new(self, epoch, "finetune", plan.sub_batches);
            runner.batch_size = plan.sub_batch_size;
            let (dec, enc) = (self.cfg.decoder_iters, self.cfg.encoder_iters);
            runner.schedule(self, Target::Decoder, dec)?;
            runner.schedule(self, Target::Encoder, enc)?;
            let loss = runner.mean_loss();
            let validation = self.emit(epoch, sink)?;
            history.push(EpochRecord {
                epoch,
                train_loss: loss,
                validation,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
            self.next_epoch += 1;
        }
        Ok(history)
    }
}

/// Random streams and loss bookkeeping for one epoch.
struct EpochRunner {
    epoch: usize,
    messages: crate::rng::Rng,
    noise: crate::rng::Rng,
    epoch_batch: Option<MessageBatch>,
    batch_size: usize,
    sub_batches: usize,
    loss_sum: f64,
    iterations: usize,
}

impl EpochRunner {
    fn new(trainer: &Trainer, epoch: usize, stream: &str, sub_batches: usize) -> Self {
        let seed = trainer.cfg.seed;
        let mut messages = substream(seed, &format!("{stream}-messages"), epoch as u64);
        let batch_size = trainer.cfg.batch_size;
        let epoch_batch = (trainer.cfg.batch_policy == BatchPolicy::FreshPerEpoch && sub_batches == 1)
            .then(|| MessageBatch::random(batch_size, trainer.model.spec().k(), &mut messages));
        Self {
            epoch,
            messages,
            noise: substream(seed, &format!("{stream}-noise"), epoch as u64),
            epoch_batch,
            batch_size,
            sub_batches,
            loss_sum: 0.0,
            iterations: 0,
        }
    }

    fn mean_loss(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.loss_sum / self.iterations as f64)
    }

    fn sample(&mut self, trainer: &Trainer, target: Target) -> Sample {
        let spec = trainer.model.spec();
        let policy = match target {
            Target::Encoder => trainer.cfg.encoder_snr,
            _ => trainer.cfg.decoder_snr,
        };
        let messages = match &self.epoch_batch {
            Some(batch) => batch.clone(),
            None => MessageBatch::random(self.batch_size, spec.k(), &mut self.messages),
        };
        Sample::draw(trainer.channel, &policy, messages, spec.n(), &mut self.noise)
    }

    fn schedule(&mut self, trainer: &mut Trainer, target: Target, iters: usize) -> Result<()> {
        let epoch = self.epoch;
        for iteration in 0..iters {
            let diverged = |what: &'static str| Error::Diverged {
                what,
                epoch,
                iteration,
                schedule: target.label(),
            };
            let result = if self.sub_batches == 1 {
                let sample = self.sample(trainer, target);
                trainer.step(target, &sample)
            } else {
                let samples: Vec<Sample> = (0..self.sub_batches).map(|_| self.sample(trainer, target)).collect();
                trainer.accumulated_step(target, &samples)
            };
            let loss = match result {
                Ok(l) => l,
                Err(Error::NonFiniteGradient) => return Err(diverged("loss or gradient")),
                Err(e) => return Err(e),
            };
            self.loss_sum += loss;
            self.iterations += 1;
        }
        Ok(())
    }
}

/// Trains a fresh or partially trained model for `cfg.epochs` epochs.
pub fn train(
    model: ProductAeModel,
    cfg: &TrainConfig,
    channel: ChannelKind,
    sink: &mut dyn CheckpointSink,
) -> Result<(ProductAeModel, TrainHistory)> {
    let mut trainer = Trainer::new(model, cfg.clone(), channel)?;
    let history = trainer.run(sink)?;
    Ok((trainer.into_model(), history))
}
