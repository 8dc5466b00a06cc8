//! Benchmarks for the simulation step; see `benches/step.rs`.

pub use metanet_core::builtin::build_paper_scenario;
