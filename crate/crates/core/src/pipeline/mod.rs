//! Splitting, batching, training, evaluation and ablation.

mod ablation;
mod batch;
mod metrics;
mod report;
mod split;
mod train;

pub use ablation::{
    attention_entropy, baseline_accuracy, feature_ablation, fit_and_score, write_ablation_csv, AblationRow,
    FeatureTable, HeadEntropy,
};
pub use batch::{make_batches, BatchOrder};
pub use metrics::{metrics_from_confusion, ConfusionMatrix, Metrics};
pub use report::{confusion_csv, emit_report, summary_text, MetricsReport, REPORT_FORMAT_VERSION};
pub use split::{
    class_split_sizes, stratified_split, stratified_split_labels, validate_ratios, SplitIndices, DEFAULT_RATIOS,
};
pub use train::{
    encode_records, evaluate, evaluate_examples, texts_with_label, train_loop, EpochRecord, TrainConfig,
};
