//! Criterion benchmarks for the epiwalk engine; see `benches/`.
