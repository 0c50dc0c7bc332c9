//! Evaluation: baseline distances, kNN curves, datasets, the synthetic
//! generator, and the experiment runner.

mod dataset;
mod distance;
mod experiment;
mod knn;
mod synth;

pub use dataset::{LabeledDataset, Split, FILE_MASS_TOLERANCE};
pub use distance::{baseline_distance, Baseline, EmdDistance, HistogramDistance};
pub use experiment::{
    run_experiment, run_task, DistanceSpec, ExperimentConfig, ExperimentReport, TaskOutput,
    TaskStatus, TrainedMetric,
};
pub use knn::{knn_eval, knn_from_distances, pairwise_distances, KnnCurves};
pub use synth::{synth_generate, SynthConfig};
