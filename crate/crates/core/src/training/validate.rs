use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDraw, ChannelKind, SnrPolicy};
use crate::codec::{MessageBatch, ProductAeModel};
use crate::error::{Error, Result};
use crate::eval::stats::ErrorStats;
use crate::rng::substream;
use crate::training::config::{same_snr, ValidationConfig};
use crate::training::trainer::Checkpoint;

/// Rows decoded per chunk during validation.
const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub snr_db: f64,
    pub stats: ErrorStats,
}

/// Messages and unit-scale channel randomness fixed once per seed, replayed at
/// every grid SNR so all epochs are scored on identical noise.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSet {
    pub snrs_db: Vec<f64>,
    messages: MessageBatch,
    draw: ChannelDraw,
}

impl ValidationSet {
    pub fn new(kind: ChannelKind, cfg: &ValidationConfig, k: usize, n: usize) -> Self {
        let mut rng = substream(cfg.seed, "validation", 0);
        let messages = MessageBatch::random(cfg.words, k, &mut rng);
        let draw = ChannelDraw::sample(kind, &SnrPolicy::Point(0.0), cfg.words, n, &mut rng);
        Self {
            snrs_db: cfg.snrs_db.clone(),
            messages,
            draw,
        }
    }

    pub fn messages(&self) -> &MessageBatch {
        &self.messages
    }

    pub fn evaluate(&self, model: &ProductAeModel) -> Result<Vec<ValidationPoint>> {
        let rows = self.messages.rows();
        let mut codewords = Vec::with_capacity(rows.div_ceil(CHUNK));
        for start in (0..rows).step_by(CHUNK) {
            let end = (start + CHUNK).min(rows);
            codewords.push(model.encode(&self.messages.slice_rows(start, end))?);
        }
        let mut points = Vec::with_capacity(self.snrs_db.len());
        for &snr_db in &self.snrs_db {
            let draw = self.draw.at_snr(snr_db);
            let mut stats = ErrorStats::new(self.messages.k());
            for (chunk, c) in codewords.iter().enumerate() {
                let start = chunk * CHUNK;
                let end = (start + CHUNK).min(rows);
                let y = draw.rows_slice(start, end).apply(c)?;
                let decoded = model.decode(&y)?;
                stats.record_blocks(self.messages.slice_rows(start, end).row_errors(&decoded));
            }
            points.push(ValidationPoint { snr_db, stats });
        }
        Ok(points)
    }
}

fn best_index<'a>(runs: impl Iterator<Item = &'a [ValidationPoint]>, snr_db: f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, points) in runs.enumerate() {
        let ber = points
            .iter()
            .find(|p| same_snr(p.snr_db, snr_db))
            .ok_or(Error::SnrNotInGrid(snr_db))?
            .stats
            .ber();
        if best.is_none_or(|(_, b)| ber < b) {
            best = Some((i, ber));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidInput("no checkpoints to select from".into()))
}

/// The checkpoint with minimum validation BER at `snr_db`; the earliest wins ties.
pub fn select_checkpoint(checkpoints: &[Checkpoint], snr_db: f64) -> Result<&Checkpoint> {
    let i = best_index(checkpoints.iter().map(|c| c.validation.as_slice()), snr_db)?;
    Ok(&checkpoints[i])
}

/// Same rule over a history's records; returns the winning epoch.
pub fn select_epoch(history: &crate::training::TrainHistory, snr_db: f64) -> Result<usize> {
    let i = best_index(history.records.iter().map(|r| r.validation.as_slice()), snr_db)?;
    Ok(history.records[i].epoch)
}
