//! Criterion benchmarks for graphtron-core; see `benches/rounds.rs`.
