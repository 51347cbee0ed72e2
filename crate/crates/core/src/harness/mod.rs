//! Continual-learning experiment driver: datasets, task streams, the
//! train/replay/evaluate loop, and the latency model.

mod continual;
mod data;
mod latency;
mod stream;

pub use continual::{
    evaluate, mean_accuracy, run_continual, AccuracyMatrix, ContinualConfig, ContinualRun, ReplayConfig, RunMetrics,
    StepRecord, TaskRecord, WriteSnapshot,
};
pub use data::{synthetic_digit_split, synthetic_digits, FeatureSet, ImageSet};
pub use latency::{calibrate_overhead, estimate_latency, latency_breakdown, LatencyBreakdown, LatencyModelParams};
pub use stream::{build_permuted_mnist, build_split_features, Task, TaskDescriptor, TaskStream};
