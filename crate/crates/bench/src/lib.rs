//! Criterion benchmarks for `rca-core`; see `benches/`.
