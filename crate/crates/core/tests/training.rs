use productae::channel::{ChannelKind, SnrPolicy};
use productae::codec::{MessageBatch, NetShape, ProductAeModel, ProductAeSpec};
use productae::eval::ErrorStats;
use productae::nn::ParamStore;
use productae::rng::substream;
use productae::training::{
    select_checkpoint, select_epoch, BatchPolicy, Checkpoint, Discard, FineTunePlan, KeepBest, Sample, Schedule,
    Target, TrainConfig, Trainer, ValidationConfig, ValidationPoint,
};
use productae::Error;

fn spec() -> ProductAeSpec {
    ProductAeSpec::uniform((4, 2), (4, 2), 2, 2, NetShape::new(1, 12))
}

fn model(seed: u64) -> ProductAeModel {
    ProductAeModel::new(spec(), &mut substream(seed, "model", 0)).unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch_size: 32,
        encoder_iters: 2,
        decoder_iters: 3,
        encoder_snr: SnrPolicy::Point(2.0),
        decoder_snr: SnrPolicy::Range { lo: -0.5, hi: 3.0 },
        lr_enc: 1e-3,
        lr_dec: 1e-3,
        schedule: Schedule::Joint,
        pair_iters: Vec::new(),
        batch_policy: BatchPolicy::FreshPerIteration,
        fine_tune: None,
        l2: 0.0,
        validation: ValidationConfig {
            snrs_db: vec![1.0, 3.0],
            words: 300,
            criterion_snr_db: 3.0,
            seed: 5,
        },
        seed: 11,
    }
}

fn encoder_params(m: &ProductAeModel) -> Vec<Vec<f64>> {
    m.encoder_ids().iter().map(|&i| m.param(i).data().to_vec()).collect()
}

fn decoder_params(m: &ProductAeModel) -> Vec<Vec<f64>> {
    m.decoder_ids().iter().map(|&i| m.param(i).data().to_vec()).collect()
}

fn sample(rows: usize, seed: u64) -> Sample {
    let mut rng = substream(seed, "sample", 0);
    let messages = MessageBatch::random(rows, 4, &mut rng);
    Sample::draw(
        ChannelKind::Awgn,
        &SnrPolicy::Range { lo: 0.0, hi: 2.0 },
        messages,
        16,
        &mut rng,
    )
}

#[test]
fn accumulated_step_matches_direct_step() {
    let batch = sample(64, 1);
    for target in [Target::Encoder, Target::Decoder, Target::Pair(2)] {
        let mut direct = Trainer::new(model(2), config(), ChannelKind::Awgn).unwrap();
        let mut accumulated = Trainer::new(model(2), config(), ChannelKind::Awgn).unwrap();
        for _ in 0..3 {
            direct.step(target, &batch).unwrap();
            accumulated.accumulated_step(target, &batch.split(8).unwrap()).unwrap();
        }
        let (a, b) = (direct.model(), accumulated.model());
        for id in 0..a.tensor_count() {
            for (x, y) in a.param(id).data().iter().zip(b.param(id).data()) {
                let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-300);
                assert!(rel < 1e-10 || x == y, "{target:?} tensor {id}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn zero_iterations_change_nothing() {
    let mut cfg = config();
    cfg.encoder_iters = 0;
    cfg.decoder_iters = 0;
    let start = model(3);
    let mut trainer = Trainer::new(start.clone(), cfg, ChannelKind::Awgn).unwrap();
    let history = trainer.run(&mut Discard).unwrap();
    assert_eq!(trainer.model(), &start);
    assert_eq!(history.records.len(), 3);
    assert!(history.records.iter().all(|r| r.train_loss.is_none()));
}

#[test]
fn schedules_touch_only_their_networks() {
    let batch = sample(32, 4);
    let mut trainer = Trainer::new(model(4), config(), ChannelKind::Awgn).unwrap();
    let enc = encoder_params(trainer.model());
    let dec = decoder_params(trainer.model());
    trainer.step(Target::Decoder, &batch).unwrap();
    trainer.step(Target::Pair(1), &batch).unwrap();
    assert_eq!(encoder_params(trainer.model()), enc);
    assert_ne!(decoder_params(trainer.model()), dec);

    let dec = decoder_params(trainer.model());
    trainer.step(Target::Encoder, &batch).unwrap();
    assert_eq!(decoder_params(trainer.model()), dec);
    assert_ne!(encoder_params(trainer.model()), enc);

    let m = trainer.model();
    let pair2 = m.pair_ids(2);
    let before: Vec<_> = pair2.iter().map(|&i| m.param(i).clone()).collect();
    trainer.step(Target::Pair(1), &batch).unwrap();
    let m = trainer.model();
    assert!(pair2.iter().zip(&before).all(|(&i, t)| m.param(i) == t));
}

#[test]
fn scheme_counters() {
    let cases = [
        (Schedule::Joint, 3 * 2, vec![0, 0]),
        (Schedule::SchemeI, 0, vec![4 * 2, 5 * 2]),
        (Schedule::SchemeII { start_iters: 1 }, 2, vec![8, 10]),
        (
            Schedule::SchemeIII {
                start_iters: 1,
                end_iters: 2,
            },
            (1 + 2) * 2,
            vec![8, 10],
        ),
    ];
    for (schedule, full, per_pair) in cases {
        let mut cfg = config();
        cfg.schedule = schedule;
        cfg.pair_iters = vec![4, 5];
        let mut trainer = Trainer::new(model(5), cfg, ChannelKind::Awgn).unwrap();
        trainer.run(&mut Discard).unwrap();
        let c = trainer.counters();
        assert_eq!(c.encoder, 4, "{schedule:?}");
        assert_eq!(c.full_decoder, full, "{schedule:?}");
        assert_eq!(c.per_pair, per_pair, "{schedule:?}");
    }
}

#[test]
fn seeded_runs_are_identical() {
    let run = |policy| {
        let mut cfg = config();
        cfg.batch_policy = policy;
        let mut trainer = Trainer::new(model(6), cfg, ChannelKind::Rayleigh).unwrap();
        let mut sink: Vec<Checkpoint> = Vec::new();
        let history = trainer.run(&mut sink).unwrap();
        (sink, history.records.iter().map(|r| r.train_loss).collect::<Vec<_>>())
    };
    for policy in [BatchPolicy::FreshPerIteration, BatchPolicy::FreshPerEpoch] {
        let (a, la) = run(policy);
        let (b, lb) = run(policy);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!(a.len(), 3);
        assert_eq!(a.iter().map(|c| c.epoch).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
    assert_ne!(run(BatchPolicy::FreshPerIteration).1, run(BatchPolicy::FreshPerEpoch).1);
}

#[test]
fn validation_noise_is_frozen() {
    let trainer = Trainer::new(model(7), config(), ChannelKind::Awgn).unwrap();
    assert_eq!(trainer.validate().unwrap(), trainer.validate().unwrap());
    let other = Trainer::new(model(7), config(), ChannelKind::Awgn).unwrap();
    assert_eq!(trainer.validation_set(), other.validation_set());
}

#[test]
fn non_finite_loss_reports_divergence() {
    let mut m = model(8);
    let id = m.decoder_ids()[0];
    m.param_mut(id).data_mut()[0] = f64::NAN;
    let mut trainer = Trainer::new(m, config(), ChannelKind::Awgn).unwrap();
    match trainer.run_epoch(1) {
        Err(Error::Diverged {
            epoch,
            iteration,
            schedule,
            ..
        }) => {
            assert_eq!((epoch, iteration), (1, 0));
            assert_eq!(schedule, "decoder");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn fine_tuning_runs_and_counts() {
    let mut trainer = Trainer::new(model(9), config(), ChannelKind::Awgn).unwrap();
    trainer.run(&mut Discard).unwrap();
    let plan = FineTunePlan {
        sub_batches: 4,
        sub_batch_size: 16,
        epochs: 1,
        reset_moments: true,
    };
    let mut sink = Vec::new();
    let history = trainer.fine_tune(&plan, &mut sink).unwrap();
    assert_eq!(history.records[0].epoch, 3);
    assert_eq!(trainer.counters().encoder, 2 * 2 + 2);
    assert_eq!(trainer.counters().full_decoder, 3 * 2 + 3);
    assert_eq!(trainer.optimizers().encoder.step_count, 2);
}

fn point(snr_db: f64, bit_errors: u64) -> ValidationPoint {
    ValidationPoint {
        snr_db,
        stats: ErrorStats {
            trials: 100,
            bit_errors,
            block_errors: bit_errors,
            k: 4,
            capped: false,
        },
    }
}

#[test]
fn checkpoint_selection() {
    let m = model(10);
    let ck = |epoch, errs: [u64; 2]| Checkpoint {
        epoch,
        model: m.clone(),
        optimizers: None,
        validation: vec![point(1.0, errs[0]), point(3.0, errs[1])],
        seed: 0,
        fingerprint: 0,
    };
    let cks = vec![ck(0, [50, 40]), ck(1, [30, 12]), ck(2, [10, 12]), ck(3, [20, 30])];
    assert_eq!(select_checkpoint(&cks, 3.0).unwrap().epoch, 1);
    assert_eq!(select_checkpoint(&cks, 1.0).unwrap().epoch, 2);
    assert!(matches!(select_checkpoint(&cks, 2.0), Err(Error::SnrNotInGrid(_))));

    let mut best = KeepBest::new(3.0);
    for c in cks.iter().cloned() {
        use productae::training::CheckpointSink;
        best.accept(c).unwrap();
    }
    assert_eq!(best.best.unwrap().epoch, 1);
}

#[test]
fn history_selection_matches_checkpoints() {
    let mut trainer = Trainer::new(model(12), config(), ChannelKind::Awgn).unwrap();
    let mut sink = Vec::new();
    let history = trainer.run(&mut sink).unwrap();
    assert_eq!(
        select_epoch(&history, 3.0).unwrap(),
        select_checkpoint(&sink, 3.0).unwrap().epoch
    );
}
