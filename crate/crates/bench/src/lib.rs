//! Synthetic instances, solver comparisons, speedup sweeps and reports for
//! `dicod-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod config;
pub mod experiment;
pub mod generate;
pub mod plot;

use dicod_core::CscError;

pub use bound::{theoretical_speedup_bound, SpeedupBound};
pub use experiment::{
    run_comparison, run_speedup_sweep, update_count_speedup, write_speedup_csv, write_trace_csv,
    ComparisonReport, SolverSpec, SpeedupProxy, SpeedupRow, SweepReport, TraceSummary,
};
pub use generate::{generate_instance, lambda_max, GenerationSpec, Instance, LambdaSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CscError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// 2 for protocol violations and worker failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Core(CscError::Protocol(_) | CscError::WorkerFailure { .. }) => 2,
            _ => 1,
        }
    }
}
