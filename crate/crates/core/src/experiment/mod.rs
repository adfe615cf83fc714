//! Configuration-driven experiment orchestration, metrics, diagnostics, and
//! persisted artifacts.

mod artifacts;
mod config;
mod diagnostics;
mod metrics;
mod report;
mod spectrum;

pub use artifacts::{read_csv, write_csv, CsvTable};
pub use config::{
    AttackConfig, DatasetConfig, DefenseMethod, ExperimentConfig, IsolationConfig, Task,
};
pub use diagnostics::{
    gradient_magnitude_histogram, ks_distance, unlearn_rate_sweep, GradRecord, SweepRow,
};
pub use metrics::{compute_acc, compute_acc_node, compute_asr, compute_asr_node};
pub use report::{evaluate_checkpoint, run_experiment, ExperimentReport, SeedMetrics};
pub use spectrum::feature_spectrum;
