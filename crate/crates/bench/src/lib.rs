//! Criterion benchmarks for the encoders, decoders and baselines live in `benches/`.
