//! Criterion benchmarks for the interpreter and simulator; see `benches/`.
