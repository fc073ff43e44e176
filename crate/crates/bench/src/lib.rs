//! Criterion benchmarks for the core calculus live under benches/.
