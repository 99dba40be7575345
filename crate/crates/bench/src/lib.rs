//! Benchmarks for probsum live in `benches/`.
