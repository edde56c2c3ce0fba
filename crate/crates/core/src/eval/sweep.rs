use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDraw, ChannelKind, SnrPolicy};
use crate::codec::MessageBatch;
use crate::error::{Error, Result};
use crate::eval::codecs::Codec;
use crate::eval::stats::ErrorStats;
use crate::rng::{substream, Rng};

pub const CSV_HEADER: &str = "snr_db,ber,bler,bit_errors,block_errors,trials,capped";

/// Simulate blocks until `min_block_errors` are seen or `max_blocks` are spent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    pub min_block_errors: u64,
    pub max_blocks: u64,
    /// Blocks simulated per shard per round.
    pub batch_size: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_block_errors: 100,
            max_blocks: 1_000_000,
            batch_size: 1000,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_block_errors == 0 || self.max_blocks == 0 || self.batch_size == 0 {
            return Err(Error::Config("stop rule limits must be positive".into()));
        }
        Ok(())
    }

    /// Runs exactly `blocks` trials.
    pub fn fixed(blocks: u64) -> Self {
        Self {
            min_block_errors: u64::MAX,
            max_blocks: blocks,
            batch_size: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub stats: ErrorStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub codec: String,
    pub channel: ChannelKind,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, snr_db: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.snr_db - snr_db).abs() < 1e-9)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let s = &p.stats;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.snr_db,
                s.ber(),
                s.bler(),
                s.bit_errors,
                s.block_errors,
                s.trials,
                s.capped
            )
            .unwrap();
        }
        out
    }
}

/// One parsed row of a sweep CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub snr_db: f64,
    pub ber: f64,
    pub bler: f64,
    pub bit_errors: u64,
    pub block_errors: u64,
    pub trials: u64,
    pub capped: bool,
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "expected sweep CSV header {CSV_HEADER:?}, found {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::InvalidInput(format!("malformed sweep CSV row {}: {line:?}", i + 2));
            if f.len() != 7 {
                return Err(bad());
            }
            Ok(CsvRow {
                snr_db: f[0].parse().map_err(|_| bad())?,
                ber: f[1].parse().map_err(|_| bad())?,
                bler: f[2].parse().map_err(|_| bad())?,
                bit_errors: f[3].parse().map_err(|_| bad())?,
                block_errors: f[4].parse().map_err(|_| bad())?,
                trials: f[5].parse().map_err(|_| bad())?,
                capped: f[6].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn validate_grid(snrs_db: &[f64]) -> Result<()> {
    if snrs_db.is_empty() {
        return Err(Error::InvalidInput("SNR grid is empty".into()));
    }
    if snrs_db.iter().any(|s| s.is_nan()) || snrs_db.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("SNR grid must be strictly increasing".into()));
    }
    Ok(())
}

fn simulate(codec: &dyn Codec, kind: ChannelKind, snr_db: f64, blocks: usize, rng: &mut Rng) -> Result<ErrorStats> {
    let messages = MessageBatch::random(blocks, codec.k(), rng);
    let x = codec.encode_batch(&messages)?;
    let draw = ChannelDraw::sample(kind, &SnrPolicy::Point(snr_db), blocks, codec.n(), rng);
    let y = draw.apply(&x)?;
    let decoded = codec.decode_batch(&y, snr_db)?;
    let mut stats = ErrorStats::new(codec.k());
    stats.record_blocks(messages.row_errors(&decoded));
    Ok(stats)
}

/// Monte-Carlo BER/BLER at every grid point. Each point runs rounds in which
/// every shard simulates one batch from its own random stream; results are
/// merged in shard order, so the outcome depends only on the seed and the
/// shard count.
pub fn monte_carlo_sweep(
    codec: &dyn Codec,
    kind: ChannelKind,
    snrs_db: &[f64],
    stop: &StopRule,
    seed: u64,
    shards: usize,
) -> Result<SweepResult> {
    validate_grid(snrs_db)?;
    stop.validate()?;
    if shards == 0 {
        return Err(Error::Config("shard count must be positive".into()));
    }
    if !codec.supports(kind) {
        return Err(Error::InvalidInput(format!(
            "{} cannot be evaluated on the {kind} channel",
            codec.name()
        )));
    }
    let mut points = Vec::with_capacity(snrs_db.len());
    for (p, &snr_db) in snrs_db.iter().enumerate() {
        let component = format!("sweep-point-{p}");
        let mut rngs: Vec<Rng> = (0..shards).map(|s| substream(seed, &component, s as u64)).collect();
        let mut stats = ErrorStats::new(codec.k());
        while stats.block_errors < stop.min_block_errors && stats.trials < stop.max_blocks {
            let mut remaining = stop.max_blocks - stats.trials;
            let mut sizes = Vec::with_capacity(shards);
            for _ in 0..shards {
                let size = remaining.min(stop.batch_size as u64);
                sizes.push(size as usize);
                remaining -= size;
            }
            let results: Vec<Result<ErrorStats>> = if shards == 1 {
                vec![simulate(codec, kind, snr_db, sizes[0], &mut rngs[0])]
            } else {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = rngs
                        .iter_mut()
                        .zip(&sizes)
                        .filter(|(_, &size)| size > 0)
                        .map(|(rng, &size)| scope.spawn(move || simulate(codec, kind, snr_db, size, rng)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("sweep worker panicked"))
                        .collect()
                })
            };
            for r in results {
                stats.merge(&r?);
            }
        }
        stats.capped = stats.block_errors < stop.min_block_errors;
        points.push(SweepPoint { snr_db, stats });
    }
    Ok(SweepResult {
        codec: codec.name(),
        channel: kind,
        seed,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::codecs::Uncoded;

    #[test]
    fn noiseless_identity_has_no_errors() {
        let r = monte_carlo_sweep(
            &Uncoded { k: 8 },
            ChannelKind::Awgn,
            &[f64::INFINITY],
            &StopRule::fixed(500),
            1,
            1,
        )
        .unwrap();
        let s = r.points[0].stats;
        assert_eq!((s.trials, s.bit_errors, s.block_errors), (500, 0, 0));
        assert!(s.capped);
    }

    #[test]
    fn stop_rule_is_respected() {
        let stop = StopRule {
            min_block_errors: 50,
            max_blocks: 10_000,
            batch_size: 64,
        };
        let r = monte_carlo_sweep(&Uncoded { k: 4 }, ChannelKind::Awgn, &[0.0, 20.0], &stop, 2, 3).unwrap();
        let low = r.points[0].stats;
        assert!(low.block_errors >= 50 && !low.capped);
        assert!(low.trials <= 3 * 64 * (50 / 3 + 2));
        let high = r.points[1].stats;
        assert_eq!(high.trials, 10_000);
        assert!(high.capped);
    }

    #[test]
    fn deterministic_given_seed_and_shards() {
        let stop = StopRule::fixed(3000);
        let run = |shards| {
            monte_carlo_sweep(&Uncoded { k: 5 }, ChannelKind::Rayleigh, &[1.0, 2.0], &stop, 9, shards).unwrap()
        };
        assert_eq!(run(4), run(4));
        assert_eq!(run(1), run(1));
    }

    #[test]
    fn csv_round_trip() {
        let r = monte_carlo_sweep(
            &Uncoded { k: 5 },
            ChannelKind::Awgn,
            &[0.0, 0.5],
            &StopRule::fixed(100),
            3,
            1,
        )
        .unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        let rows = parse_sweep_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].ber, r.points[1].stats.ber());
        assert_eq!(rows[0].trials, 100);
    }

    #[test]
    fn grids_must_increase() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[0.0, 1.0]).is_ok());
    }
}
