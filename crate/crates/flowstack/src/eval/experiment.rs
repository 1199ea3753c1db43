use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, metrics_from_confusion};
use super::report::{aggregate, ExperimentReport};
use super::roc::auc;
use crate::ensemble::{stack_fit, BaseSpec};
use crate::flowdata::{
    apply_scaler, clean, encode_labels, fit_scaler, make_splits, stratified_sample, FlowTable,
    LabelVector, Split,
};
use crate::learners::{knn_fit, svm_fit, SmoConfig};
use crate::rng::{derive_seed, STREAM_SAMPLE, STREAM_SPLITS, STREAM_STACK, STREAM_SVM};
use crate::{Error, Result};

pub const MODEL_KNN: &str = "KNN";
pub const MODEL_SVM: &str = "SVM";
pub const MODEL_STACK: &str = "STACK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub sample_fraction: f64,
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    pub positive_label: String,
    pub knn_k: usize,
    pub svm: SmoConfig,
    pub internal_folds: usize,
    pub l2_lambda: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sample_fraction: 0.10,
            train_fraction: 0.10,
            repeats: 10,
            seed: 42,
            positive_label: "DrDoS_NTP".to_string(),
            knn_k: 5,
            svm: SmoConfig::default(),
            internal_folds: 5,
            l2_lambda: 1e-3,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let check_fraction = |name: &str, v: f64, open_top: bool| -> Result<()> {
            let ok = v > 0.0 && if open_top { v < 1.0 } else { v <= 1.0 };
            if !ok {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("{v} out of range"),
                });
            }
            Ok(())
        };
        check_fraction("sample_fraction", self.sample_fraction, false)?;
        check_fraction("train_fraction", self.train_fraction, true)?;
        if self.repeats == 0 {
            return Err(Error::InvalidParameter {
                name: "repeats".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidParameter {
                name: "k".into(),
                reason: "must be at least 1".into(),
            });
        }
        if self.internal_folds < 2 {
            return Err(Error::InvalidParameter {
                name: "internal_folds".into(),
                reason: "must be at least 2".into(),
            });
        }
        if self.l2_lambda < 0.0 {
            return Err(Error::InvalidParameter {
                name: "l2_lambda".into(),
                reason: "must be nonnegative".into(),
            });
        }
        if self.svm.c <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "c".into(),
                reason: "must be positive".into(),
            });
        }
        if self.svm.tolerance <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tolerance".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One table row: metrics of one model over one evaluation, matching the
/// AUC / CA / F1 / PRECISION / RECALL report schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model_name: String,
    pub auc: f64,
    pub ca: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub repeats: usize,
    pub train_fraction: f64,
}

pub(crate) struct RepeatOutcome {
    pub rows: Vec<MetricRow>,
    pub warnings: Vec<String>,
    /// Per model: pooled P(class 1) test scores, for ROC dumps.
    pub scores: Vec<(String, Vec<f64>)>,
    pub y_test: Vec<u8>,
}

fn score_model(
    name: &str,
    y_test: &[u8],
    p1_scores: &[f64],
    preds: &[u8],
    cfg: &EvalConfig,
) -> Result<MetricRow> {
    let cm = confusion(y_test, preds)?;
    let m = metrics_from_confusion(&cm)?;
    Ok(MetricRow {
        model_name: name.to_string(),
        auc: auc(y_test, p1_scores)?,
        ca: m.ca,
        f1: m.f1,
        precision: m.precision,
        recall: m.recall,
        repeats: cfg.repeats,
        train_fraction: cfg.train_fraction,
    })
}

pub(crate) fn run_repeat(
    table: &FlowTable,
    labels: &LabelVector,
    split: &Split,
    cfg: &EvalConfig,
    repeat: usize,
) -> Result<RepeatOutcome> {
    let scaler = fit_scaler(table, &split.train)?;
    let scaled = apply_scaler(table, &scaler)?;
    let x_train = scaled.features.select_rows(&split.train);
    let y_train = labels.select(&split.train);
    let x_test = scaled.features.select_rows(&split.test);
    let y_test = labels.select(&split.test);

    let mut warnings = Vec::new();

    let knn = knn_fit(x_train.clone(), &y_train, cfg.knn_k)?;
    let svm_cfg = cfg
        .svm
        .with_seed(derive_seed(derive_seed(cfg.seed, STREAM_SVM), repeat as u64));
    let svm = svm_fit(&x_train, &y_train, &svm_cfg)?;
    if !svm.converged {
        warnings.push(format!("repeat {repeat}: svm did not converge"));
    }
    let stack = stack_fit(
        &x_train,
        &y_train,
        &[
            BaseSpec::Knn { k: cfg.knn_k },
            BaseSpec::Svm { config: svm_cfg },
        ],
        cfg.internal_folds,
        cfg.l2_lambda,
        derive_seed(derive_seed(cfg.seed, STREAM_STACK), repeat as u64),
    )?;
    if !stack.meta.converged {
        warnings.push(format!("repeat {repeat}: meta-classifier hit iteration cap"));
    }
    if stack.base_models.iter().any(|m| !m.converged()) {
        warnings.push(format!("repeat {repeat}: a stacked base model did not converge"));
    }

    let n_test = x_test.rows();
    let mut knn_scores = Vec::with_capacity(n_test);
    let mut knn_preds = Vec::with_capacity(n_test);
    let mut svm_scores = Vec::with_capacity(n_test);
    let mut svm_preds = Vec::with_capacity(n_test);
    let mut stack_scores = Vec::with_capacity(n_test);
    let mut stack_preds = Vec::with_capacity(n_test);
    for row in x_test.iter_rows() {
        knn_scores.push(knn.predict_proba(row)?.1);
        knn_preds.push(knn.predict(row)?);
        svm_scores.push(svm.predict_proba(row)?.1);
        svm_preds.push(svm.predict(row)?);
        stack_scores.push(stack.predict_proba(row)?.1);
        stack_preds.push(stack.predict(row)?);
    }

    let rows = vec![
        score_model(MODEL_KNN, &y_test.values, &knn_scores, &knn_preds, cfg)?,
        score_model(MODEL_SVM, &y_test.values, &svm_scores, &svm_preds, cfg)?,
        score_model(MODEL_STACK, &y_test.values, &stack_scores, &stack_preds, cfg)?,
    ];
    Ok(RepeatOutcome {
        rows,
        warnings,
        scores: vec![
            (MODEL_KNN.to_string(), knn_scores),
            (MODEL_SVM.to_string(), svm_scores),
            (MODEL_STACK.to_string(), stack_scores),
        ],
        y_test: y_test.values,
    })
}

pub(crate) struct PreparedData {
    pub table: FlowTable,
    pub labels: LabelVector,
    pub splits: Vec<Split>,
    pub clean_secs: f64,
    pub sample_secs: f64,
}

pub(crate) fn prepare(table: &FlowTable, cfg: &EvalConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let t0 = Instant::now();
    let cleaned = clean(table)?;
    let labels = encode_labels(&cleaned, &cfg.positive_label)?;
    let clean_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (sampled, sampled_labels) = stratified_sample(
        &cleaned,
        &labels,
        cfg.sample_fraction,
        derive_seed(cfg.seed, STREAM_SAMPLE),
    )?;
    let plan = make_splits(
        sampled.features.rows(),
        &sampled_labels,
        cfg.train_fraction,
        cfg.repeats,
        derive_seed(cfg.seed, STREAM_SPLITS),
    )?;
    Ok(PreparedData {
        table: sampled,
        labels: sampled_labels,
        splits: plan.splits,
        clean_secs,
        sample_secs: t1.elapsed().as_secs_f64(),
    })
}

/// The full repeated-subsampling pipeline: stratified sample once, then for
/// each repeat fit the scaler on the train split, train kNN / SVM / stack,
/// and score all three on the test split. Deterministic under cfg.seed at
/// any worker count: every repeat draws from its own derived RNG stream and
/// results are assembled in repeat order.
pub fn run_experiment(table: &FlowTable, cfg: &EvalConfig) -> Result<ExperimentReport> {
    let prepared = prepare(table, cfg)?;
    let t2 = Instant::now();
    let outcomes: Vec<RepeatOutcome> = prepared
        .splits
        .par_iter()
        .enumerate()
        .map(|(r, split)| run_repeat(&prepared.table, &prepared.labels, split, cfg, r))
        .collect::<Result<_>>()?;
    let train_secs = t2.elapsed().as_secs_f64();

    let mut rows = Vec::with_capacity(outcomes.len() * 3);
    let mut warnings = Vec::new();
    for outcome in &outcomes {
        rows.extend(outcome.rows.iter().cloned());
        warnings.extend(outcome.warnings.iter().cloned());
    }
    let aggregates = [MODEL_KNN, MODEL_SVM, MODEL_STACK]
        .iter()
        .map(|name| {
            let model_rows: Vec<MetricRow> = rows
                .iter()
                .filter(|r| r.model_name == *name)
                .cloned()
                .collect();
            aggregate(&model_rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut timings = BTreeMap::new();
    timings.insert("clean_secs".to_string(), prepared.clean_secs);
    timings.insert("sample_secs".to_string(), prepared.sample_secs);
    timings.insert("train_eval_secs".to_string(), train_secs);
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        aggregates,
        warnings,
        timings,
    })
}

/// Test labels and pooled P(class 1) scores of one model for the first
/// repeat, for ROC dumps.
pub fn repeat_scores(
    table: &FlowTable,
    cfg: &EvalConfig,
    model_name: &str,
) -> Result<(Vec<u8>, Vec<f64>)> {
    let wanted = model_name.to_ascii_uppercase();
    if ![MODEL_KNN, MODEL_SVM, MODEL_STACK].contains(&wanted.as_str()) {
        return Err(Error::UnknownModel(model_name.to_string()));
    }
    let prepared = prepare(table, cfg)?;
    let outcome = run_repeat(&prepared.table, &prepared.labels, &prepared.splits[0], cfg, 0)?;
    let scores = outcome
        .scores
        .into_iter()
        .find(|(name, _)| *name == wanted)
        .map(|(_, s)| s)
        .expect("model name checked above");
    Ok((outcome.y_test, scores))
}
