//! Accuracy metrics, validation and the experiment sweep.

pub mod experiment;
mod heatmap;
mod metrics;

pub use heatmap::{heatmap, Heatmap};
pub use metrics::{kfold_bins, kfold_cv, mape, model_error, split_real};
pub use experiment::{run_experiment, write_results, Degradation, ExperimentSpec, HeatmapRequest, ResultRow};
