//! Experiment plumbing: flat config files, reference optimal values with an
//! on-disk cache, and the runner that writes per-solver trace CSVs.

mod config;
mod reference;
mod runner;

pub use config::{ExperimentConfig, CONFIG_KEYS};
pub use reference::{
    compute_reference, start_point, ReferenceCache, ReferenceRecord, REFERENCE_MAX_ITERS,
};
pub use runner::{
    raw_gap_csv, run_experiment, trace_csv, ExperimentOutcome, RunStatus, SummaryRow, THRESHOLDS,
    TRACE_HEADER,
};
