//! Monte Carlo experiment engine: configs, replications, aggregation and
//! output files.

mod config;
mod engine;
mod output;

pub use config::{
    BoxSpec, ExperimentConfig, KernelSpec, ModeSpec, ModelSpec, TuningSpec, X0Spec, SCHEMA_VERSION,
};
pub use engine::{
    fit_loglog_slope, point_seed, prepare, run_experiment, run_replication,
    run_replication_detailed, summarize, ExperimentOutput, ExperimentSummary, GridPoint,
    PointSummary, PreparedExperiment, ReplicationDetail, ReplicationRecord, SlopeFit,
    DEGRADED_FAILURE_SHARE,
};
pub use output::{
    read_records, read_summary, write_outputs, write_records, RECORDS_FILE, SUMMARY_FILE,
};
