//! Criterion benchmarks for `stochetd`; see `benches/steps.rs`.
