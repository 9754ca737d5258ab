//! Benchmark instance generation, file formats, metrics and the suite runner.

pub mod generate;
pub mod io;
pub mod metrics;
pub mod runner;

pub use generate::{generate_instance, DemandMode, GenConfig, RewardMode};
pub use io::{
    read_instance, read_policy, read_records, write_instance, write_instance_with_meta,
    read_csv, write_csv, write_policy, write_records, RunRecord,
};
pub use metrics::{compute_metrics, CaptureRecord, MetricsRow, OracleRecord, RelaxationRecord};
pub use runner::{run_benchmark, run_method, BenchSummary, Method, MethodOutcome, RunContext, Suite};
