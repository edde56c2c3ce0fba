use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use productae::baselines::{construct, LinearCode, PolarSpec, ProductCode};
use productae::codec::ProductAeModel;
use productae::eval::experiments::ROBUSTNESS_SHIFT_DB;
use productae::eval::{
    adaptivity_experiment, monte_carlo_sweep, robustness_experiment, widened_snrs, Codec, ExperimentKind,
    ExperimentPlan, MlProductCodec, StopRule, SweepResult, Uncoded,
};
use productae::io::{
    create_dir, history_to_jsonl, load_checkpoint, merge_curves, parse_snr_grid, read_text, save_checkpoint,
    write_text, DirectorySink, RunConfig,
};
use productae::rng::substream;
use productae::training::{
    config_fingerprint, Checkpoint, CheckpointSink, FineTunePlan, TrainConfig, TrainHistory, Trainer,
};

use crate::{
    BaselineArgs, Code, ConstructPolarArgs, EvalArgs, ExperimentArgs, ExportCurvesArgs, FinetuneArgs, SweepArgs,
    TrainArgs,
};

/// Stream that seeds model initialization for `train`.
pub const MODEL_INIT_STREAM: &str = "model-init";

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .context("no output directory: pass --out or set output.dir in the config")?;
    create_dir(&dir)?;
    Ok(dir)
}

fn load_config(path: &Path) -> Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn load_model(path: &Path, expected: Option<&RunConfig>) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if let Some(cfg) = expected {
        ensure!(
            ck.model.spec() == &cfg.spec,
            "spec mismatch: checkpoint {} holds {} but the config describes {}",
            path.display(),
            ck.model.spec().name(),
            cfg.spec.name()
        );
    }
    Ok(ck)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes through to a directory and reports each epoch on standard error.
struct Progress {
    inner: DirectorySink,
    criterion_snr_db: f64,
}

impl CheckpointSink for Progress {
    fn accept(&mut self, ck: Checkpoint) -> productae::Result<()> {
        if let Some(p) = ck
            .validation
            .iter()
            .find(|p| (p.snr_db - self.criterion_snr_db).abs() < 1e-9)
        {
            eprintln!("epoch {:>4}  ber@{} dB {:.6}", ck.epoch, p.snr_db, p.stats.ber());
        }
        self.inner.accept(ck)
    }
}

fn finish_training(out: &Path, history: &TrainHistory, sink: &Progress) -> Result<()> {
    write_text(out.join("history.jsonl"), &history_to_jsonl(history))?;
    if let Some(best) = sink.inner.best_epoch() {
        eprintln!("best epoch {best} written to {}", out.join("best.pae").display());
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        cfg.train.epochs = epochs;
    }
    cfg.validate()?;
    let out = output_dir(a.out, &cfg)?;
    write_text(out.join("config.json"), &cfg.to_json())?;
    let model = ProductAeModel::new(cfg.spec.clone(), &mut substream(cfg.train.seed, MODEL_INIT_STREAM, 0))?;
    let criterion = cfg.train.validation.criterion_snr_db;
    let mut sink = Progress {
        inner: DirectorySink::new(&out, criterion)?,
        criterion_snr_db: criterion,
    };
    let mut trainer = Trainer::new(model, cfg.train, cfg.channel)?;
    let history = trainer.run(&mut sink)?;
    finish_training(&out, &history, &sink)
}

pub fn finetune(a: FinetuneArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    let ck = load_model(&a.checkpoint, Some(&cfg))?;
    let mut plan = cfg.train.fine_tune.clone().unwrap_or(FineTunePlan {
        sub_batches: 1,
        sub_batch_size: cfg.train.batch_size,
        epochs: 1,
        reset_moments: false,
    });
    plan.sub_batches = a.sub_batches.unwrap_or(plan.sub_batches);
    plan.sub_batch_size = a.sub_batch_size.unwrap_or(plan.sub_batch_size);
    plan.epochs = a.epochs.unwrap_or(plan.epochs);
    plan.reset_moments |= a.reset_moments;
    cfg.train.fine_tune = Some(plan.clone());
    cfg.validate()?;
    let out = output_dir(a.out, &cfg)?;
    write_text(out.join("config.json"), &cfg.to_json())?;
    let criterion = cfg.train.validation.criterion_snr_db;
    let mut sink = Progress {
        inner: DirectorySink::new(&out, criterion)?,
        criterion_snr_db: criterion,
    };
    let mut trainer = Trainer::resume(ck.model, ck.optimizers, cfg.train, cfg.channel, ck.epoch + 1)?;
    let history = trainer.fine_tune(&plan, &mut sink)?;
    finish_training(&out, &history, &sink)
}

fn stop_rule(s: &SweepArgs) -> StopRule {
    match s.blocks {
        Some(blocks) => StopRule {
            batch_size: s.batch_size,
            ..StopRule::fixed(blocks)
        },
        None => StopRule {
            min_block_errors: s.min_block_errors,
            max_blocks: s.max_blocks,
            batch_size: s.batch_size,
        },
    }
}

fn run_sweep(codec: &dyn Codec, s: &SweepArgs) -> Result<()> {
    let snrs = parse_snr_grid(&s.snrs)?;
    let result = monte_carlo_sweep(codec, s.channel.into(), &snrs, &stop_rule(s), s.seed, s.shards)?;
    emit(s.csv.as_deref(), &result.to_csv())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let ck = load_model(&a.checkpoint, None)?;
    run_sweep(&ck.model, &a.sweep)
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let codec: Box<dyn Codec> = match a.code {
        Code::Uncoded => Box::new(Uncoded { k: a.k.unwrap_or(100) }),
        Code::Product => {
            let list = a.components.as_deref().context("--code product needs --components")?;
            let components = list
                .split(',')
                .map(|c| c.trim().parse::<LinearCode>())
                .collect::<productae::Result<Vec<_>>>()?;
            Box::new(MlProductCodec::new(ProductCode::new(components)?)?)
        }
        Code::Polar => Box::new(match (&a.polar_spec, a.n, a.k) {
            (Some(path), None, None) => {
                let spec: PolarSpec = serde_json::from_str(&read_text(path)?)
                    .with_context(|| format!("parsing polar spec {}", path.display()))?;
                spec.validate()?;
                spec
            }
            (None, Some(n), Some(k)) => construct(n, k, a.design_snr, a.trials, a.sweep.seed)?,
            _ => bail!("--code polar needs either --polar-spec or both --n and --k"),
        }),
    };
    run_sweep(codec.as_ref(), &a.sweep)
}

fn resolve_plan(a: &ExperimentArgs, kind: ExperimentKind) -> Result<(RunConfig, ExperimentPlan, Checkpoint, PathBuf)> {
    let cfg = load_config(&a.config)?;
    let mut plan = cfg.experiment.clone().context("the config has no experiment section")?;
    plan.kind = kind;
    if let Some(e) = a.fine_tune_epochs {
        plan.fine_tune_epochs = e;
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(s) = a.shards {
        plan.shards = s;
    }
    plan.validate()?;
    let path = a.checkpoint.clone().unwrap_or_else(|| PathBuf::from(&plan.checkpoint));
    let ck = load_model(&path, Some(&cfg))?;
    let out = output_dir(a.out.clone(), &cfg)?;
    Ok((cfg, plan, ck, out))
}

fn write_curve(out: &Path, name: &str, result: &SweepResult) -> Result<()> {
    Ok(write_text(out.join(format!("{name}.csv")), &result.to_csv())?)
}

fn save_tuned(out: &Path, name: &str, model: ProductAeModel, history: &TrainHistory, cfg: &TrainConfig) -> Result<()> {
    let last = history.records.last().context("fine-tune produced no epochs")?;
    let ck = Checkpoint {
        epoch: last.epoch,
        model,
        optimizers: None,
        validation: last.validation.clone(),
        seed: cfg.seed,
        fingerprint: config_fingerprint(cfg),
    };
    save_checkpoint(&ck, out.join(format!("{name}.pae")))?;
    Ok(write_text(
        out.join(format!("{name}_history.jsonl")),
        &history_to_jsonl(history),
    )?)
}

fn print_table(columns: &[(&str, &SweepResult)]) {
    let mut header = String::from("snr_db");
    for (name, _) in columns {
        header.push_str(&format!("  {name:>14}"));
    }
    println!("{header}");
    for (i, p) in columns[0].1.points.iter().enumerate() {
        let mut line = format!("{:>6}", p.snr_db);
        for (_, r) in columns {
            line.push_str(&format!("  {:>14.6e}", r.points[i].stats.ber()));
        }
        println!("{line}");
    }
}

pub fn robustness(a: ExperimentArgs) -> Result<()> {
    let (cfg, plan, ck, out) = resolve_plan(&a, ExperimentKind::Robustness)?;
    let mut tune_cfg = cfg.train.clone();
    (tune_cfg.encoder_snr, tune_cfg.decoder_snr) = widened_snrs(&cfg.train, ROBUSTNESS_SHIFT_DB);
    let fine_tune = (plan.fine_tune_epochs > 0).then_some((&tune_cfg, plan.fine_tune_epochs));
    let report = robustness_experiment(
        &ck.model,
        plan.train_channel,
        plan.test_channel,
        &plan.snrs_db,
        &plan.stop,
        plan.seed,
        plan.shards,
        fine_tune,
    )?;
    write_curve(&out, "train_channel", &report.on_train_channel)?;
    write_curve(&out, "test_channel", &report.on_test_channel)?;
    let train_name = format!("{}", plan.train_channel);
    let test_name = format!("{}", plan.test_channel);
    match report.fine_tuned {
        None => print_table(&[
            (&train_name, &report.on_train_channel),
            (&test_name, &report.on_test_channel),
        ]),
        Some(tuned) => {
            write_curve(&out, "fine_tuned_train_channel", &tuned.on_train_channel)?;
            write_curve(&out, "fine_tuned_test_channel", &tuned.on_test_channel)?;
            print_table(&[
                (&train_name, &report.on_train_channel),
                (&test_name, &report.on_test_channel),
                (&format!("tuned {train_name}"), &tuned.on_train_channel),
                (&format!("tuned {test_name}"), &tuned.on_test_channel),
            ]);
            save_tuned(&out, "fine_tuned", tuned.model, &tuned.history, &tune_cfg)?;
        }
    }
    Ok(())
}

pub fn adaptivity(a: ExperimentArgs) -> Result<()> {
    let (cfg, plan, ck, out) = resolve_plan(&a, ExperimentKind::Adaptivity)?;
    let report = adaptivity_experiment(
        &ck.model,
        plan.train_channel,
        plan.test_channel,
        &cfg.train,
        plan.fine_tune_epochs,
        &plan.snrs_db,
        &plan.stop,
        plan.seed,
        plan.shards,
    )?;
    write_curve(&out, "before_new", &report.before_new)?;
    write_curve(&out, "before_old", &report.before_old)?;
    write_curve(&out, "after_new", &report.after_new)?;
    write_curve(&out, "after_old", &report.after_old)?;
    let (old, new) = (plan.train_channel, plan.test_channel);
    print_table(&[
        (&format!("before {new}"), &report.before_new),
        (&format!("after {new}"), &report.after_new),
        (&format!("before {old}"), &report.before_old),
        (&format!("after {old}"), &report.after_old),
    ]);
    save_tuned(&out, "adapted", report.adapted, &report.history, &cfg.train)
}

pub fn construct_polar(a: ConstructPolarArgs) -> Result<()> {
    let spec = construct(a.n, a.k, a.design_snr, a.trials, a.seed)?;
    let record = spec.construction.as_ref().expect("construction records its estimates");
    if let Some(w) = record.warning() {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.bit_channels {
        let frozen = spec.frozen_mask();
        let mut csv = String::from("index,ber,frozen\n");
        for (i, b) in record.bit_channel_ber.iter().enumerate() {
            csv.push_str(&format!("{i},{b},{}\n", frozen[i]));
        }
        write_text(path, &csv)?;
    }
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&spec)? + "\n"))
}

pub fn export_curves(a: ExportCurvesArgs) -> Result<()> {
    let mut curves = Vec::with_capacity(a.curves.len());
    for item in &a.curves {
        let (label, path) = item
            .split_once('=')
            .with_context(|| format!("expected label=path, got {item:?}"))?;
        curves.push((label.to_string(), read_text(path)?));
    }
    emit(a.out.as_deref(), &merge_curves(&curves)?)
}
