use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use productae::baselines::{construct, LinearCode, ProductCode};
use productae::channel::{ChannelDraw, ChannelKind, SnrPolicy};
use productae::codec::{MessageBatch, NetShape, ProductAeModel, ProductAeSpec};
use productae::eval::{Codec, MlProductCodec};
use productae::rng::substream;
use productae::training::{loss_and_gradients, Sample, Target};

const BATCH: usize = 256;

fn models() -> Vec<(&'static str, ProductAeModel)> {
    let mut rng = substream(0, "bench-model", 0);
    vec![
        (
            "(4,2)x(4,2)",
            ProductAeModel::new(
                ProductAeSpec::uniform((4, 2), (4, 2), 2, 2, NetShape::new(3, 32)),
                &mut rng,
            )
            .unwrap(),
        ),
        (
            "(15,10)x(20,10)",
            ProductAeModel::new(ProductAeSpec::full_size(15, 10, 20, 10), &mut rng).unwrap(),
        ),
    ]
}

fn neural_codec(c: &mut Criterion) {
    let mut group = c.benchmark_group("productae");
    group.sample_size(10);
    for (name, model) in models() {
        let spec = model.spec().clone();
        let mut rng = substream(1, "bench-data", 0);
        let messages = MessageBatch::random(BATCH, spec.k(), &mut rng);
        let codewords = model.encode(&messages).unwrap();
        let draw = ChannelDraw::sample(ChannelKind::Awgn, &SnrPolicy::Point(2.0), BATCH, spec.n(), &mut rng);
        let received = draw.apply(&codewords).unwrap();
        let sample = Sample::draw(
            ChannelKind::Awgn,
            &SnrPolicy::Point(2.0),
            messages.clone(),
            spec.n(),
            &mut rng,
        );

        group.throughput(Throughput::Elements(BATCH as u64));
        group.bench_function(BenchmarkId::new("encode", name), |b| {
            b.iter(|| model.encode(black_box(&messages)))
        });
        group.bench_function(BenchmarkId::new("decode", name), |b| {
            b.iter(|| model.decode(black_box(&received)))
        });
        group.bench_function(BenchmarkId::new("decoder_step_gradients", name), |b| {
            b.iter(|| loss_and_gradients(&model, black_box(&sample), Target::Decoder, 0.0))
        });
    }
    group.finish();
}

fn classical(c: &mut Criterion) {
    let mut group = c.benchmark_group("baselines");
    let mut rng = substream(2, "bench-data", 0);
    for (n, k) in [(64, 32), (300, 100)] {
        let spec = construct(n, k, 1.0, 2000, 5).unwrap();
        let messages = MessageBatch::random(BATCH, k, &mut rng);
        let x = Codec::encode_batch(&spec, &messages).unwrap();
        let draw = ChannelDraw::sample(ChannelKind::Awgn, &SnrPolicy::Point(1.0), BATCH, n, &mut rng);
        let y = draw.apply(&x).unwrap();
        group.throughput(Throughput::Elements(BATCH as u64));
        group.bench_function(BenchmarkId::new("polar_sc_decode", format!("({n},{k})")), |b| {
            b.iter(|| Codec::decode_batch(&spec, black_box(&y), 1.0))
        });
    }

    let h = LinearCode::hamming74();
    let ml = MlProductCodec::new(ProductCode::new(vec![h.clone(), h]).unwrap()).unwrap();
    let messages = MessageBatch::random(BATCH, 16, &mut rng);
    let x = ml.encode_batch(&messages).unwrap();
    let y = ChannelDraw::sample(ChannelKind::Awgn, &SnrPolicy::Point(1.0), BATCH, 49, &mut rng)
        .apply(&x)
        .unwrap();
    group.sample_size(10);
    group.bench_function("ml_decode/hamming74^2", |b| {
        b.iter(|| ml.decode_batch(black_box(&y), 1.0))
    });
    group.finish();
}

criterion_group!(benches, neural_codec, classical);
criterion_main!(benches);
