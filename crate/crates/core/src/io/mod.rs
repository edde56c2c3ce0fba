//! Checkpoint files, run configs, curves and training logs.

pub mod checkpoint;
pub mod config;
pub mod files;

pub use checkpoint::{checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, CheckpointHeader};
pub use config::{OutputPaths, RunConfig};
pub use files::{
    append_history, create_dir, epoch_file_name, history_from_jsonl, history_to_jsonl, merge_curves, parse_snr_grid,
    read_text, write_text, DirectorySink,
};
