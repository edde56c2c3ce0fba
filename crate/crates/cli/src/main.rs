use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use productae::channel::ChannelKind;

mod commands;

#[derive(Parser)]
#[command(
    name = "productae",
    version,
    about = "Train, evaluate and compare product autoencoder codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a run config and write checkpoints, history and validation curves.
    Train(TrainArgs),
    /// Continue training a checkpoint with gradient-accumulated large batches.
    Finetune(FinetuneArgs),
    /// Monte-Carlo BER/BLER sweep of a checkpoint.
    Eval(EvalArgs),
    /// Monte-Carlo sweep of a classical code.
    Baseline(BaselineArgs),
    /// Evaluate a checkpoint off its training channel, optionally after a widened fine-tune.
    Robustness(ExperimentArgs),
    /// Fine-tune a checkpoint on a new channel and sweep both channels before and after.
    Adaptivity(ExperimentArgs),
    /// Build a punctured polar code by genie-aided Monte-Carlo construction.
    ConstructPolar(ConstructPolarArgs),
    /// Merge labelled sweep CSVs into one table.
    ExportCurves(ExportCurvesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Channel {
    Awgn,
    Rayleigh,
}

impl From<Channel> for ChannelKind {
    fn from(c: Channel) -> Self {
        match c {
            Channel::Awgn => ChannelKind::Awgn,
            Channel::Rayleigh => ChannelKind::Rayleigh,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the training seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the epoch count of the config.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sub-batches accumulated per step.
    #[arg(long)]
    sub_batches: Option<usize>,
    #[arg(long)]
    sub_batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Start from zero Adam moments instead of the checkpointed ones.
    #[arg(long)]
    reset_moments: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// `lo:hi:step` (inclusive) or a comma-separated list, in dB.
    #[arg(long)]
    snrs: String,
    #[arg(long, value_enum, default_value = "awgn")]
    channel: Channel,
    /// Destination CSV; standard output when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent random streams per SNR point, run in parallel.
    #[arg(long, default_value_t = 1)]
    shards: usize,
    /// Simulate exactly this many blocks per point instead of stopping on errors.
    #[arg(long, conflicts_with_all = ["min_block_errors", "max_blocks"])]
    blocks: Option<u64>,
    #[arg(long, default_value_t = 100)]
    min_block_errors: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_blocks: u64,
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Code {
    Polar,
    Product,
    Uncoded,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    code: Code,
    /// Polar: a spec written by `construct-polar`.
    #[arg(long)]
    polar_spec: Option<PathBuf>,
    /// Polar: blocklength when constructing on the fly.
    #[arg(long)]
    n: Option<usize>,
    /// Polar: dimension when constructing on the fly. Uncoded: bits per block.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    design_snr: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Product: comma-separated components such as `spc:3,hamming74`.
    #[arg(long)]
    components: Option<String>,
    #[command(flatten)]
    sweep: SweepArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Run config with an `experiment` section.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the checkpoint named in the plan.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the fine-tune epochs of the plan.
    #[arg(long)]
    fine_tune_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shards: Option<usize>,
}

#[derive(Args)]
struct ConstructPolarArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    design_snr: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination JSON; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the estimated bit-channel error rates as CSV.
    #[arg(long)]
    bit_channels: Option<PathBuf>,
}

#[derive(Args)]
struct ExportCurvesArgs {
    /// `label=path` pairs, one per sweep CSV.
    #[arg(required = true)]
    curves: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Finetune(a) => commands::finetune(a),
        Command::Eval(a) => commands::eval(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::Adaptivity(a) => commands::adaptivity(a),
        Command::ConstructPolar(a) => commands::construct_polar(a),
        Command::ExportCurves(a) => commands::export_curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
