//! Benchmark-only crate; see `benches/tracking.rs`.
