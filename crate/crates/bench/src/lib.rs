//! Criterion benchmarks for the classification pipeline and the solver;
//! see `benches/pipeline.rs`.
