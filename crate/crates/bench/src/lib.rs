//! Criterion benchmarks for the solver and the Monte Carlo engine; see `benches/`.
