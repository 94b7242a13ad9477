//! Criterion benchmarks for edgeshare; see `benches/simulation.rs`.
