//! Criterion benchmarks for the simulator, filter and training loop live in
//! `benches/`; this crate has no library code.
