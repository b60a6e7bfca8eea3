//! Criterion benchmarks for the closed forms, oracles and samplers; see `benches/`.
