//! Evaluation: confusion-matrix metrics with class-support weighting, ROC
//! curves and trapezoidal AUC, a synthetic two-cluster bench, and the
//! repeated-subsampling experiment harness.

mod experiment;
mod metrics;
mod report;
mod roc;
mod synth;

pub use experiment::{repeat_scores, run_experiment, EvalConfig, MetricRow};
pub use metrics::{confusion, metrics_from_confusion, ConfusionMatrix, MetricScores};
pub use report::{aggregate, format_report, format_sweep, round5, ExperimentReport, ReportStyle};
pub use roc::{auc, roc_points, RocCurve, RocPoint};
pub use synth::synth_flows;
