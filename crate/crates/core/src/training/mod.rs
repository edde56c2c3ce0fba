//! Training loops, validation and checkpoint selection.

pub mod config;
pub mod trainer;
pub mod validate;

pub use config::{BatchPolicy, FineTunePlan, Schedule, TrainConfig, ValidationConfig};
pub use trainer::{
    config_fingerprint, evaluate_loss, loss_and_gradients, train, Checkpoint, CheckpointSink, Discard, EpochRecord,
    KeepBest, Optimizers, Sample, Target, TrainHistory, Trainer, UpdateCounters,
};
pub use validate::{select_checkpoint, select_epoch, ValidationPoint, ValidationSet};
