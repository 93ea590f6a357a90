//! Criterion benchmarks for the `horseshoe` crate live in `benches/`.
