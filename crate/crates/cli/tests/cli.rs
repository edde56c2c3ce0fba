use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use productae::baselines::uncoded_bpsk_ber;
use productae::channel::{ChannelKind, SnrPolicy};
use productae::codec::{NetShape, ProductAeModel, ProductAeSpec};
use productae::eval::{parse_sweep_csv, ExperimentKind, ExperimentPlan, StopRule};
use productae::io::{load_checkpoint, RunConfig};
use productae::rng::substream;
use productae::training::{BatchPolicy, Schedule, TrainConfig, ValidationConfig};

fn productae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_productae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = productae(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = productae(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(!err.trim().is_empty());
    err
}

fn tiny_config(epochs: usize, checkpoint: &Path) -> RunConfig {
    RunConfig {
        spec: ProductAeSpec::uniform((3, 2), (4, 2), 2, 2, NetShape::new(1, 8)),
        train: TrainConfig {
            epochs,
            batch_size: 32,
            encoder_iters: 2,
            decoder_iters: 4,
            encoder_snr: SnrPolicy::Point(2.0),
            decoder_snr: SnrPolicy::Range { lo: -0.5, hi: 3.0 },
            lr_enc: 1e-3,
            lr_dec: 1e-3,
            schedule: Schedule::Joint,
            pair_iters: vec![],
            batch_policy: BatchPolicy::FreshPerIteration,
            fine_tune: None,
            l2: 0.0,
            validation: ValidationConfig {
                snrs_db: vec![2.0, 3.0],
                words: 200,
                criterion_snr_db: 3.0,
                seed: 1,
            },
            seed: 5,
        },
        channel: ChannelKind::Awgn,
        experiment: Some(ExperimentPlan {
            kind: ExperimentKind::Adaptivity,
            checkpoint: checkpoint.to_string_lossy().into_owned(),
            train_channel: ChannelKind::Awgn,
            test_channel: ChannelKind::Rayleigh,
            fine_tune_epochs: 1,
            snrs_db: vec![1.0, 3.0],
            stop: StopRule::fixed(500),
            shards: 1,
            seed: 3,
        }),
        output: Default::default(),
    }
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    /// Writes a tiny config and trains it into `run/`.
    fn trained(&self, epochs: usize) -> RunConfig {
        let cfg = tiny_config(epochs, &self.path("run/best.pae"));
        std::fs::write(self.path("cfg.json"), cfg.to_json()).unwrap();
        ok(&["train", "--config", &self.s("cfg.json"), "--out", &self.s("run")]);
        cfg
    }
}

#[test]
fn train_with_zero_epochs_writes_the_initial_model() {
    let ws = Workspace::new();
    let cfg = ws.trained(0);
    let ck = load_checkpoint(ws.path("run/epoch_0000.pae")).unwrap();
    let init = ProductAeModel::new(cfg.spec.clone(), &mut substream(cfg.train.seed, "model-init", 0)).unwrap();
    assert_eq!(ck.model, init);
    assert_eq!(ck.epoch, 0);
    assert!(!ws.path("run/epoch_0001.pae").exists());
    assert!(ws.path("run/best.pae").exists());
    assert_eq!(RunConfig::load(ws.path("run/config.json")).unwrap(), cfg);
}

#[test]
fn eval_grid_produces_one_row_per_point() {
    let ws = Workspace::new();
    ws.trained(0);
    ok(&[
        "eval",
        "--checkpoint",
        &ws.s("run/epoch_0000.pae"),
        "--snrs",
        "0:4:1",
        "--channel",
        "awgn",
        "--blocks",
        "200",
        "--csv",
        &ws.s("eval.csv"),
    ]);
    let text = std::fs::read_to_string(ws.path("eval.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
    let rows = parse_sweep_csv(&text).unwrap();
    let snrs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    assert_eq!(snrs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn uncoded_baseline_matches_the_q_function() {
    let out = ok(&[
        "baseline", "--code", "uncoded", "--k", "100", "--snrs", "0:0:1", "--blocks", "10000", "--seed", "9",
    ]);
    let rows = parse_sweep_csv(&out).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    let bits = (r.trials * 100) as f64;
    let oracle = uncoded_bpsk_ber(0.0);
    assert!((oracle - 0.158655).abs() < 1e-6);
    let se = (oracle * (1.0 - oracle) / bits).sqrt();
    assert!((r.ber - oracle).abs() < 3.0 * se, "{} vs {oracle}", r.ber);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = Workspace::new();
    let b = Workspace::new();
    a.trained(2);
    b.trained(2);
    for name in [
        "epoch_0000.pae",
        "epoch_0001.pae",
        "epoch_0002.pae",
        "best.pae",
        "validation.csv",
    ] {
        let x = std::fs::read(a.path("run").join(name)).unwrap();
        let y = std::fs::read(b.path("run").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let eval = |ws: &Workspace| {
        ok(&[
            "eval",
            "--checkpoint",
            &ws.s("run/best.pae"),
            "--snrs",
            "1,3",
            "--blocks",
            "300",
            "--seed",
            "4",
        ])
    };
    assert_eq!(eval(&a), eval(&b));
}

#[test]
fn finetune_continues_the_epoch_count() {
    let ws = Workspace::new();
    ws.trained(1);
    ok(&[
        "finetune",
        "--checkpoint",
        &ws.s("run/epoch_0001.pae"),
        "--config",
        &ws.s("cfg.json"),
        "--out",
        &ws.s("ft"),
        "--sub-batches",
        "2",
        "--sub-batch-size",
        "16",
        "--epochs",
        "2",
    ]);
    for e in [2, 3] {
        assert_eq!(
            load_checkpoint(ws.path(&format!("ft/epoch_{e:04}.pae"))).unwrap().epoch,
            e
        );
    }
    assert!(!ws.path("ft/epoch_0001.pae").exists());
    let history = std::fs::read_to_string(ws.path("ft/history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 2);
}

#[test]
fn experiment_drivers_write_their_curves() {
    let ws = Workspace::new();
    ws.trained(1);
    let cfg = ws.s("cfg.json");
    ok(&["adaptivity", "--config", &cfg, "--out", &ws.s("adapt")]);
    for name in [
        "before_new.csv",
        "before_old.csv",
        "after_new.csv",
        "after_old.csv",
        "adapted.pae",
    ] {
        assert!(ws.path("adapt").join(name).exists(), "{name}");
    }
    ok(&[
        "robustness",
        "--config",
        &cfg,
        "--out",
        &ws.s("robust"),
        "--fine-tune-epochs",
        "0",
    ]);
    assert!(ws.path("robust/test_channel.csv").exists());
    assert!(!ws.path("robust/fine_tuned.pae").exists());
    ok(&["robustness", "--config", &cfg, "--out", &ws.s("robust2")]);
    assert!(ws.path("robust2/fine_tuned_test_channel.csv").exists());
    assert!(ws.path("robust2/fine_tuned.pae").exists());
}

#[test]
fn classical_baselines_and_curve_export() {
    let ws = Workspace::new();
    ok(&[
        "construct-polar",
        "--n",
        "12",
        "--k",
        "6",
        "--design-snr",
        "1",
        "--trials",
        "2000",
        "--out",
        &ws.s("polar.json"),
        "--bit-channels",
        &ws.s("channels.csv"),
    ]);
    assert_eq!(
        std::fs::read_to_string(ws.path("channels.csv"))
            .unwrap()
            .lines()
            .count(),
        17
    );
    ok(&[
        "baseline",
        "--code",
        "polar",
        "--polar-spec",
        &ws.s("polar.json"),
        "--snrs",
        "0:2:1",
        "--blocks",
        "500",
        "--csv",
        &ws.s("polar.csv"),
    ]);
    ok(&[
        "baseline",
        "--code",
        "product",
        "--components",
        "spc:3,spc:3",
        "--snrs",
        "0:2:1",
        "--blocks",
        "500",
        "--csv",
        &ws.s("product.csv"),
        "--shards",
        "2",
    ]);
    let merged = ok(&[
        "export-curves",
        &format!("polar={}", ws.s("polar.csv")),
        &format!("product={}", ws.s("product.csv")),
    ]);
    assert_eq!(merged.lines().count(), 7);
    assert!(merged.lines().nth(4).unwrap().starts_with("product,0,"));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let ws = Workspace::new();
    fails(&["eval", "--checkpoint", &ws.s("missing.pae"), "--snrs", "0:1:1"]);
    fails(&["baseline", "--code", "uncoded", "--snrs", "0:1:1", "--bogus"]);
    fails(&["baseline", "--code", "uncoded", "--snrs", "1:0:1"]);
    fails(&[
        "baseline",
        "--code",
        "polar",
        "--snrs",
        "0",
        "--n",
        "8",
        "--k",
        "4",
        "--channel",
        "rayleigh",
    ]);
    fails(&[
        "baseline",
        "--code",
        "product",
        "--components",
        "hamming74,hamming74,spc:3",
        "--snrs",
        "0",
    ]);
    fails(&["frobnicate"]);

    std::fs::write(ws.path("bad.json"), "{\"spec\": 1, \"extra\": true}").unwrap();
    fails(&["train", "--config", &ws.s("bad.json"), "--out", &ws.s("x")]);

    ws.trained(0);
    let mut other = tiny_config(0, &ws.path("run/best.pae"));
    other.spec.k1 = 1;
    std::fs::write(ws.path("other.json"), other.to_json()).unwrap();
    let err = fails(&[
        "finetune",
        "--checkpoint",
        &ws.s("run/best.pae"),
        "--config",
        &ws.s("other.json"),
        "--out",
        &ws.s("y"),
    ]);
    assert!(err.contains("spec mismatch"), "{err}");
}
