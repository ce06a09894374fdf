//! Evaluation methodology: stratified splits, confusion matrices and
//! macro metrics, k-fold grid search and learning curves, the prediction
//! latency benchmark, and end-to-end training pipelines.

mod classifier;
mod error;
pub mod latency;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod search;
pub mod split;

pub use classifier::Classifier;
pub use error::EvalError;
pub use latency::{latency_bench, BenchEntry, LatencyReport, ModelLatency};
pub use metrics::{confusion, metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use pipeline::{train_model, Hyperparams, ModelBundle, ModelKind, Preprocessing, SplitRecord, TrainOutcome};
pub use search::{cross_val_accuracy, grid_search, learning_curve, CurvePoint, GridResult, GridRow};
pub use split::{stratified_folds, stratified_split, stratified_split_labels, Split};
