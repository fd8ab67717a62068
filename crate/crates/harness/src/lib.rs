//! Benchmark harness for hard-constrained sequential PINNs: run
//! configuration, reference solutions, error metrics, hard-vs-soft
//! comparison and CSV artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod metrics;
pub mod run;

pub use artifacts::emit_artifacts;
pub use config::{Entry, RunConfig};
pub use error::{HarnessError, Result};
pub use metrics::relative_l2;
pub use run::{compare_modes, execute, ingest_reference, run_benchmark, Comparison, ComparisonRow, EvalGrid, RunReport};

pub use hcspinn;
