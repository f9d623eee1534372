//! Criterion benchmarks for the hot loops of `topicvec`; see `benches/`.
