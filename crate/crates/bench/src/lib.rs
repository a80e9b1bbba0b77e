//! Criterion benchmarks for the diarization pipeline live in `benches/`.
