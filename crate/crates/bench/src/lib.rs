//! Benchmarks for the chain, build and evaluation stages; see `benches/pipeline.rs`.
