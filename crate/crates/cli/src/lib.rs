//! Command-line pipelines: file-driven GenEV/CCA solves, the numeric lemma
//! validation suite, and the gap-scaling benchmark.

pub mod config;
pub mod output;
pub mod pipelines;

pub use config::{BenchArgs, CcaArgs, Command, GenevArgs, Mode, RunBackend, ValidateArgs};
pub use pipelines::{run, run_bench, BenchRow};

use lazy_spectra::Error;

/// Process exit code for an error: 2 input, 3 solver, 4 precondition.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Io(_) | Error::Format { .. } | Error::Value(_) | Error::Dimension(_) => 2,
        Error::NonConvergence { .. }
        | Error::Conditioning { .. }
        | Error::Accuracy(_)
        | Error::ScheduleExhausted { .. }
        | Error::Overflow(_)
        | Error::ResidualExhausted { .. } => 3,
        Error::Precondition(_) | Error::NotPositiveDefinite(_) => 4,
        Error::AtRound { .. } => 3,
    }
}
