//! The federated round loop, its configuration, the convergence probe and
//! metric output.

mod config;
mod emit;
mod harness;
mod probe;

pub use config::{DatasetConfig, ExperimentConfig, ModelConfig, OutputConfig, Weighting};
pub use emit::{emit, load_jsonl, read_jsonl, write_csv, write_jsonl, Format, CSV_HEADER};
pub use harness::{
    round_submissions, run_experiment, thread_pool, MetricsRecord, RoundSubmission, Setup,
    THREADS_ENV,
};
pub use probe::{convergence_probe, ProbeConfig, ProbeReport};
