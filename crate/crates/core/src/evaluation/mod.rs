//! Cross-validation protocol, metrics, task definitions and reports.

mod experiment;
mod folds;
mod metrics;
mod report;
mod task;

pub use folds::{stratified_kfold, train_indices, FoldError};
pub use metrics::{compute_metrics, ClassScore, FoldMetrics, MetricsError, MetricsReport};
pub use experiment::{
    ablation_masks, ablation_study, featurize, normalize_corpus, run_experiment, AblationKind, AblationResult,
    AblationRow, ExperimentConfig, ExperimentError, ExperimentResult, FoldRecord, InstancePrediction, Method,
    ModelBody, ModelOutput, PipelineModel, Seeds, PIPELINE_FORMAT_VERSION,
};
pub use task::{subsample, SubsampleError, Task, TaskSample, BALANCED_LITERAL, GROUP_SIZE, SMALL_LITERAL};
pub use report::{render_report, EmptyReport, Report, ReportMeta};
