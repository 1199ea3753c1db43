//! Stacked generalization: out-of-fold base-learner probabilities become a
//! new dataset for an L2-regularized logistic-regression meta-classifier.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flowdata::LabelVector;
use crate::learners::{knn_fit, svm_fit, KnnModel, SmoConfig, SvmModel};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, stream_rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum BaseSpec {
    Knn { k: usize },
    Svm { config: SmoConfig },
    /// Outputs a fixed P(class 1); a baseline and a test probe.
    Constant { p1: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum BaseModel {
    Knn(KnnModel),
    Svm(SvmModel),
    Constant { p1: f64 },
}

impl BaseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BaseSpec::Knn { .. } => "knn",
            BaseSpec::Svm { .. } => "svm",
            BaseSpec::Constant { .. } => "constant",
        }
    }

    /// Fit on (features, labels). `seed` overrides any seed in the spec so
    /// fold models draw from distinct deterministic streams.
    pub fn fit(&self, features: &Matrix, labels: &LabelVector, seed: u64) -> Result<BaseModel> {
        match self {
            BaseSpec::Knn { k } => Ok(BaseModel::Knn(knn_fit(features.clone(), labels, *k)?)),
            BaseSpec::Svm { config } => {
                Ok(BaseModel::Svm(svm_fit(features, labels, &config.with_seed(seed))?))
            }
            BaseSpec::Constant { p1 } => {
                if !(0.0..=1.0).contains(p1) {
                    return Err(Error::InvalidParameter {
                        name: "p1".into(),
                        reason: format!("{p1} not in [0, 1]"),
                    });
                }
                Ok(BaseModel::Constant { p1: *p1 })
            }
        }
    }
}

impl BaseModel {
    pub fn predict_p1(&self, x: &[f64]) -> Result<f64> {
        match self {
            BaseModel::Knn(m) => Ok(m.predict_proba(x)?.1),
            BaseModel::Svm(m) => Ok(m.predict_proba(x)?.1),
            BaseModel::Constant { p1 } => Ok(*p1),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            BaseModel::Svm(m) => m.converged,
            _ => true,
        }
    }
}

/// Out-of-fold base-learner probabilities: cell (i, b) is base b's P(class 1)
/// for row i, predicted by a model trained on every fold except row i's.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaFeatures {
    pub matrix: Matrix,
    pub fold_assignment: Vec<usize>,
    pub base_specs: Vec<BaseSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackModel {
    pub schema_version: u32,
    pub base_specs: Vec<BaseSpec>,
    pub base_models: Vec<BaseModel>,
    pub meta: LogisticModel,
    pub internal_folds: usize,
    pub seed: u64,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// with the second class offset so combined fold sizes differ by at most 1.
pub fn assign_folds(labels: &LabelVector, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter {
            name: "internal_folds".into(),
            reason: "must be at least 2".into(),
        });
    }
    if labels.positive_count < folds || labels.negative_count < folds {
        return Err(Error::ClassTooSmallForFolds);
    }
    let n = labels.len();
    let mut rng = stream_rng(seed, 0xF01D);
    let mut assignment = vec![0usize; n];
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels.values[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels.values[i] == 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    for (pos_rank, &row) in pos.iter().enumerate() {
        assignment[row] = pos_rank % folds;
    }
    let offset = pos.len() % folds;
    for (neg_rank, &row) in neg.iter().enumerate() {
        assignment[row] = (neg_rank + offset) % folds;
    }
    Ok(assignment)
}

/// Build meta-features with a caller-supplied fold assignment. The no-leakage
/// contract is relative to the assignment: a model predicting fold f never
/// sees any row of fold f.
pub fn build_meta_features_with(
    features: &Matrix,
    labels: &LabelVector,
    base_specs: &[BaseSpec],
    fold_assignment: &[usize],
    seed: u64,
) -> Result<MetaFeatures> {
    if fold_assignment.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: fold_assignment.len(),
        });
    }
    let folds = fold_assignment.iter().max().map_or(0, |m| m + 1);
    let n = features.rows();

    let per_fold: Vec<Vec<(usize, Vec<f64>)>> = (0..folds)
        .into_par_iter()
        .map(|fold| -> Result<Vec<(usize, Vec<f64>)>> {
            let train_rows: Vec<usize> = (0..n).filter(|&i| fold_assignment[i] != fold).collect();
            let fold_rows: Vec<usize> = (0..n).filter(|&i| fold_assignment[i] == fold).collect();
            let x_train = features.select_rows(&train_rows);
            let y_train = labels.select(&train_rows);
            if y_train.positive_count == 0 || y_train.negative_count == 0 {
                return Err(Error::ClassTooSmallForFolds);
            }
            let mut out = Vec::with_capacity(fold_rows.len());
            let models: Vec<BaseModel> = base_specs
                .iter()
                .enumerate()
                .map(|(b, spec)| {
                    spec.fit(
                        &x_train,
                        &y_train,
                        derive_seed(seed, (fold * base_specs.len() + b) as u64),
                    )
                })
                .collect::<Result<_>>()?;
            for &row in &fold_rows {
                let preds: Vec<f64> = models
                    .iter()
                    .map(|m| m.predict_p1(features.row(row)))
                    .collect::<Result<_>>()?;
                out.push((row, preds));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut matrix = Matrix::zeros(n, base_specs.len());
    for fold_out in per_fold {
        for (row, preds) in fold_out {
            for (b, p) in preds.iter().enumerate() {
                matrix.set(row, b, *p);
            }
        }
    }
    Ok(MetaFeatures {
        matrix,
        fold_assignment: fold_assignment.to_vec(),
        base_specs: base_specs.to_vec(),
    })
}

pub fn build_meta_features(
    features: &Matrix,
    labels: &LabelVector,
    base_specs: &[BaseSpec],
    internal_folds: usize,
    seed: u64,
) -> Result<MetaFeatures> {
    let assignment = assign_folds(labels, internal_folds, seed)?;
    build_meta_features_with(features, labels, base_specs, &assignment, seed)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss + (lambda/2)||w||^2; the bias is not penalized.
pub fn logreg_loss(features: &Matrix, labels: &[u8], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = features.rows() as f64;
    let mut loss = 0.0;
    for (i, row) in features.iter_rows().enumerate() {
        let z = row.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>() + b;
        let signed = if labels[i] == 1 { z } else { -z };
        // log(1 + exp(-signed)), stable for large |signed|
        loss += if signed > 0.0 {
            (-signed).exp().ln_1p()
        } else {
            -signed + signed.exp().ln_1p()
        };
    }
    loss / n + 0.5 * lambda * w.iter().map(|wi| wi * wi).sum::<f64>()
}

pub fn logreg_gradient(
    features: &Matrix,
    labels: &[u8],
    w: &[f64],
    b: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = features.rows() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (i, row) in features.iter_rows().enumerate() {
        let z = row.iter().zip(w).map(|(x, wi)| x * wi).sum::<f64>() + b;
        let resid = sigmoid(z) - f64::from(labels[i]);
        for (g, x) in gw.iter_mut().zip(row) {
            *g += resid * x;
        }
        gb += resid;
    }
    for (g, wi) in gw.iter_mut().zip(w) {
        *g = *g / n + lambda * wi;
    }
    (gw, gb / n)
}

/// Full-batch gradient descent with backtracking line search; the loss is
/// non-increasing across iterations. Converged when the gradient norm drops
/// to 1e-5, otherwise the cap is reached and the model is flagged.
pub fn logreg_fit(
    features: &Matrix,
    labels: &[u8],
    l2_lambda: f64,
    iterations: usize,
) -> Result<LogisticModel> {
    if features.is_empty() || labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::DegenerateLabels);
    }
    if l2_lambda < 0.0 {
        return Err(Error::InvalidParameter {
            name: "l2_lambda".into(),
            reason: "must be nonnegative".into(),
        });
    }

    let mut w = vec![0.0; features.cols()];
    let mut b = 0.0;
    let mut loss = logreg_loss(features, labels, &w, b, l2_lambda);
    let mut converged = false;
    for _ in 0..iterations {
        let (gw, gb) = logreg_gradient(features, labels, &w, b, l2_lambda);
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() <= 1e-5 {
            converged = true;
            break;
        }
        let mut step = 1.0;
        loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let nb = b - step * gb;
            let nloss = logreg_loss(features, labels, &nw, nb, l2_lambda);
            if nloss <= loss - 1e-4 * step * gnorm2 {
                w = nw;
                b = nb;
                loss = nloss;
                break;
            }
            step /= 2.0;
            if step < 1e-14 {
                break; // no descent possible at machine precision
            }
        }
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        l2_lambda,
        converged,
    })
}

impl LogisticModel {
    pub fn predict_proba(&self, meta_row: &[f64]) -> Result<(f64, f64)> {
        if meta_row.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: meta_row.len(),
            });
        }
        let z = meta_row
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>()
            + self.bias;
        let p1 = sigmoid(z);
        Ok((1.0 - p1, p1))
    }
}

/// Train the full stack: meta-classifier on out-of-fold probabilities, then
/// base models refit on the complete training split for deployment.
pub fn stack_fit(
    features: &Matrix,
    labels: &LabelVector,
    base_specs: &[BaseSpec],
    internal_folds: usize,
    l2_lambda: f64,
    seed: u64,
) -> Result<StackModel> {
    let meta_features = build_meta_features(features, labels, base_specs, internal_folds, seed)?;
    let meta = logreg_fit(&meta_features.matrix, &labels.values, l2_lambda, 500)?;
    let base_models: Vec<BaseModel> = base_specs
        .iter()
        .enumerate()
        .map(|(b, spec)| spec.fit(features, labels, derive_seed(seed, 0xFFFF + b as u64)))
        .collect::<Result<_>>()?;
    Ok(StackModel {
        schema_version: 1,
        base_specs: base_specs.to_vec(),
        base_models,
        meta,
        internal_folds,
        seed,
    })
}

impl StackModel {
    pub fn meta_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.base_models.iter().map(|m| m.predict_p1(x)).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.meta.predict_proba(&self.meta_row(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)?.1 >= 0.5))
    }
}
