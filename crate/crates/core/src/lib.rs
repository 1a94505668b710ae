//! Static analysis of Sail ISA models for secure context switching.
//!
//! The pipeline has four stages:
//!
//! 1. [`sail_syntax`] tokenizes and pattern-parses a Sail corpus into a
//!    [`SailModel`](sail_syntax::SailModel).
//! 2. [`isa_model`] (the only ISA-specific part, driven by a
//!    [`BackendConfig`](isa_model::BackendConfig)) discovers ISA-state,
//!    privilege modes and explicit CSR access rights, and [`footprint`]
//!    computes per-instruction read/write footprints over the call graph.
//! 3. [`classifier`] decides, for a (source, target) privilege pair, which
//!    state is security-sensitive and why.
//! 4. [`trace_validator`] checks footprints against symbolic-execution
//!    traces, and [`audit`] checks a context switch's swap manifest against
//!    a sensitivity report.

pub mod audit;
pub mod classifier;
pub mod cli;
pub mod footprint;
pub mod isa_model;
pub mod sail_syntax;
pub mod state;
pub mod trace_validator;

#[cfg(test)]
mod testutil;

pub use state::{AccessKind, Direction, StateInfo, StateKind, StateRef};

/// Directory of the bundled RV64 mini-corpus in the source tree.
pub fn bundled_corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join("rv64")
}
