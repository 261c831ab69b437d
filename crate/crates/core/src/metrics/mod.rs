//! Evaluation statistics: Top-K accuracy and library ceilings, ROC/AUC,
//! identification tallies with F1-optimal thresholds, spurious-hit and
//! isomer-group accounting, dilution consistency and Welch's t-test.

mod accuracy;
mod identification;
mod report;
mod roc;
pub mod stats;

pub use accuracy::{
    library_ceiling, per_analyte_topk, topk_accuracy_per_analyte, topk_accuracy_per_spectrum,
    CeilingLevel, Truth,
};
pub use identification::{
    dilution_consistency, isomer_group_stats, labeled_from_partition, optimal_threshold,
    relative_delta_percent, spurious_partition, tally_at, tally_metrics, threshold_curve,
    Consistency, GroupStats, IdentificationTally, IsomerGroup, TallyMetrics, ThresholdChoice,
};
pub use report::{
    CurvePoint, MetricRecord, MetricReport, OptimalRecord, PartitionFailure, RocRecord,
};
pub use roc::{roc_auc, LabeledScore, RocCurve};
pub use stats::{welch_t_test_one_tailed, Alternative, WelchResult};
