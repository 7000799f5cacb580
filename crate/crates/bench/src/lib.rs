//! Benchmark-only crate; see `benches/protocol.rs`.
//!
//! The `fogstream bench` CLI subcommand produces the comparative us/byte
//! table; these criterion targets exist for statistically instrumented
//! micro-measurements of the individual primitives.
