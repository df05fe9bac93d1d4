//! Small models, wrapped gradient-descent loops and transfer metrics.

mod metrics;
mod model;
mod train;

pub use metrics::{accuracy, auc, local_maxima, write_metrics_csv, MetricRow, TransferMatrix};
pub use model::{softmax, BaseLoss, Model, ModelKind, Target};
pub use train::{
    evaluate, fit, run_continuous, train_epoch, ContinuousReport, EpochSummary, EpochTrace, Evaluation, FitOptions,
    FitReport, Task, TaskSpec, DIVERGENCE_LIMIT,
};
