//! Criterion benchmarks for the optimizer hot paths live in `benches/`.
