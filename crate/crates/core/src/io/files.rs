use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{parse_sweep_csv, CSV_HEADER};
use crate::io::checkpoint::save_checkpoint;
use crate::training::{Checkpoint, CheckpointSink, EpochRecord, TrainHistory};

/// Parses `lo:hi:step` (both ends included when the step divides the span),
/// a comma-separated list, or a single value. Points are rounded to 1e-10 dB
/// so decimal steps print cleanly.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("bad SNR grid {text:?} (expected lo:hi:step or a list)"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let round = |x: f64| (x * 1e10).round() / 1e10;
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(bad());
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=count).map(|i| round(lo + i as f64 * step)).collect()
        }
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    crate::eval::validate_grid(&grid)?;
    Ok(grid)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// One JSON object per line.
pub fn history_to_jsonl(history: &TrainHistory) -> String {
    history
        .records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

pub fn history_from_jsonl(text: &str) -> Result<TrainHistory> {
    let mut history = TrainHistory::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record: EpochRecord = serde_json::from_str(line)?;
        if history.records.last().is_some_and(|l| l.epoch >= record.epoch) {
            return Err(Error::InvalidInput("history records are not epoch-ordered".into()));
        }
        history.push(record);
    }
    Ok(history)
}

pub fn append_history(path: impl AsRef<Path>, record: &EpochRecord) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{}", serde_json::to_string(record)?).map_err(|e| Error::io(path, e))
}

/// Concatenates labelled sweep CSVs under one header with a leading `curve` column.
pub fn merge_curves(curves: &[(String, String)]) -> Result<String> {
    let mut out = format!("curve,{CSV_HEADER}\n");
    for (label, text) in curves {
        if label.contains(',') || label.contains('\n') {
            return Err(Error::InvalidInput(format!(
                "curve label {label:?} contains a separator"
            )));
        }
        parse_sweep_csv(text)?;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            out.push_str(label);
            out.push(',');
            out.push_str(line.trim());
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn epoch_file_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.pae")
}

/// Writes every checkpoint to `dir/epoch_NNNN.pae`, keeps `dir/best.pae`
/// pointing at the lowest validation BER at the criterion SNR (earliest on
/// ties), and appends validation rows to `dir/validation.csv`.
pub struct DirectorySink {
    dir: PathBuf,
    criterion_snr_db: f64,
    best: Option<(usize, f64)>,
    write_all: bool,
}

impl DirectorySink {
    pub fn new(dir: impl Into<PathBuf>, criterion_snr_db: f64) -> Result<Self> {
        let dir = dir.into();
        create_dir(&dir)?;
        let csv = dir.join("validation.csv");
        write_text(&csv, "epoch,snr_db,ber,bler,bit_errors,block_errors,trials\n")?;
        Ok(Self {
            dir,
            criterion_snr_db,
            best: None,
            write_all: true,
        })
    }

    /// Only `best.pae` is written when `false`.
    pub fn write_every_epoch(mut self, yes: bool) -> Self {
        self.write_all = yes;
        self
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

impl CheckpointSink for DirectorySink {
    fn accept(&mut self, ck: Checkpoint) -> Result<()> {
        if self.write_all {
            save_checkpoint(&ck, self.dir.join(epoch_file_name(ck.epoch)))?;
        }
        let path = self.dir.join("validation.csv");
        let mut rows = String::new();
        for p in &ck.validation {
            let s = &p.stats;
            rows.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                ck.epoch,
                p.snr_db,
                s.ber(),
                s.bler(),
                s.bit_errors,
                s.block_errors,
                s.trials
            ));
        }
        let mut f = fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        f.write_all(rows.as_bytes()).map_err(|e| Error::io(&path, e))?;

        let ber = crate::training::trainer::ber_at(&ck.validation, self.criterion_snr_db)?;
        if self.best.is_none_or(|(_, b)| ber < b) {
            self.best = Some((ck.epoch, ber));
            save_checkpoint(&ck, self.dir.join("best.pae"))?;
        }
        Ok(())
    }
}
