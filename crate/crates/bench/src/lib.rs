//! Criterion benchmarks for `ncrest-core`. The targets live in `benches/`.
