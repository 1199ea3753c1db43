use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::platt::{fit_platt, PlattParams};
use crate::flowdata::LabelVector;
use crate::matrix::Matrix;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Kernel as requested in configuration; `gamma: None` resolves at fit time
/// to 1 / (d * mean feature variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: Option<f64> },
}

/// Kernel with all parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    pub kernel: KernelSpec,
    /// KKT violation threshold.
    pub tolerance: f64,
    /// Consecutive no-progress sweeps before declaring convergence.
    pub max_passes: usize,
    pub seed: u64,
    /// Stratified subsample cap on training rows; SMO is quadratic.
    pub row_cap: Option<usize>,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            kernel: KernelSpec::Rbf { gamma: None },
            tolerance: 1e-3,
            max_passes: 10,
            seed: 0,
            row_cap: Some(20_000),
        }
    }
}

impl SmoConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Trained soft-margin SVM: pruned support vectors with signed dual
/// coefficients (alpha_i * y_i), hyperplane offset, and optional Platt
/// calibration for probability outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub schema_version: u32,
    pub support_vectors: Matrix,
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c: f64,
    pub platt: Option<PlattParams>,
    pub converged: bool,
}

fn resolve_kernel(spec: KernelSpec, features: &Matrix) -> Kernel {
    match spec {
        KernelSpec::Linear => Kernel::Linear,
        KernelSpec::Rbf { gamma: Some(g) } => Kernel::Rbf { gamma: g },
        KernelSpec::Rbf { gamma: None } => {
            let vars = features.column_variances();
            let mean_var = if vars.is_empty() {
                0.0
            } else {
                vars.iter().sum::<f64>() / vars.len() as f64
            };
            let d = features.cols().max(1) as f64;
            let gamma = if mean_var > 0.0 {
                1.0 / (d * mean_var)
            } else {
                1.0 / d
            };
            Kernel::Rbf { gamma }
        }
    }
}

/// Stratified row-cap subsample for SMO training input.
fn cap_rows(labels: &[u8], cap: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    let mut rng = stream_rng(seed, 0xCAB);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let take_pos = ((pos.len() as f64 / n as f64) * cap as f64).round() as usize;
    let take_pos = take_pos.clamp(1, pos.len()).min(cap - 1);
    let take_neg = (cap - take_pos).min(neg.len());
    let mut selected: Vec<usize> = pos[..take_pos]
        .iter()
        .chain(neg[..take_neg].iter())
        .copied()
        .collect();
    selected.sort_unstable();
    selected
}

struct Smo<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    kernel: Kernel,
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
}

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel.eval(self.x.row(i), self.x.row(j))
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i], self.alpha[j]);
        let (y1, y2) = (self.y[i], self.y[j]);
        let (e1, e2) = (self.errors[i], self.errors[j]);
        let s = y1 * y2;
        let (lo, hi) = if (y1 - y2).abs() > 0.5 {
            ((a2_old - a1_old).max(0.0), (self.c + a2_old - a1_old).min(self.c))
        } else {
            ((a1_old + a2_old - self.c).max(0.0), (a1_old + a2_old).min(self.c))
        };
        if hi - lo < 1e-12 {
            return false;
        }
        let k11 = self.k(i, i);
        let k12 = self.k(i, j);
        let k22 = self.k(j, j);
        let eta = k11 + k22 - 2.0 * k12;
        if eta <= 0.0 {
            // PSD kernels give eta >= 0; eta == 0 means duplicate points.
            return false;
        }
        let a2 = (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi);
        if (a2 - a2_old).abs() < 1e-7 * (a2 + a2_old + 1e-7) {
            return false;
        }
        let a1 = a1_old + s * (a2_old - a2);
        let da1 = a1 - a1_old;
        let da2 = a2 - a2_old;

        let b1 = self.bias - e1 - y1 * da1 * k11 - y2 * da2 * k12;
        let b2 = self.bias - e2 - y1 * da1 * k12 - y2 * da2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = new_bias - self.bias;

        for r in 0..self.x.rows() {
            self.errors[r] += y1 * da1 * self.k(i, r) + y2 * da2 * self.k(j, r) + db;
        }
        self.alpha[i] = a1;
        self.alpha[j] = a2;
        self.bias = new_bias;
        true
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    /// Re-center the bias within its KKT-feasible interval and report whether
    /// the interval is narrow enough that every row is now within `tol` of
    /// its KKT condition (the stopping rule). With no interior alphas the
    /// valid bias is a whole interval, and the per-step (b1+b2)/2 heuristic
    /// can leave it off-center, making a bound row look violating.
    fn recenter_bias(&mut self) -> bool {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.x.rows() {
            // Bias that would put row i exactly on its margin.
            let cand = self.bias - self.errors[i];
            let a = self.alpha[i];
            // Same threshold as support-vector pruning: alphas below it are
            // discarded from the model, so treat them as bound here too.
            let at_zero = a <= 1e-10;
            let at_c = a >= self.c - 1e-10;
            let interior = !at_zero && !at_c;
            let positive = self.y[i] > 0.0;
            if interior || (positive && at_zero) || (!positive && at_c) {
                lo = lo.max(cand);
            }
            if interior || (positive && at_c) || (!positive && at_zero) {
                hi = hi.min(cand);
            }
        }
        // The midpoint of a gap no wider than 2*tol keeps every row within
        // tol of its KKT condition. A wider gap means some alpha is still
        // suboptimal; leave the bias alone and let further sweeps fix it.
        if lo > hi + 2.0 * self.tol {
            return false;
        }
        let new_bias = if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            self.bias.max(lo)
        } else if hi.is_finite() {
            self.bias.min(hi)
        } else {
            self.bias
        };
        let db = new_bias - self.bias;
        if db != 0.0 {
            for e in &mut self.errors {
                *e += db;
            }
            self.bias = new_bias;
        }
        true
    }

    /// Recompute the error cache from scratch, discarding incremental drift.
    fn refresh_errors(&mut self) {
        for r in 0..self.x.rows() {
            let f: f64 = (0..self.x.rows())
                .filter(|&i| self.alpha[i] > 0.0)
                .map(|i| self.alpha[i] * self.y[i] * self.k(i, r))
                .sum::<f64>()
                + self.bias;
            self.errors[r] = f - self.y[r];
        }
    }
}

/// Train by simplified SMO: sweep every row, and for each KKT violator try a
/// random partner first, then scan the remaining rows for a productive pair.
pub fn svm_fit(features: &Matrix, labels: &LabelVector, cfg: &SmoConfig) -> Result<SvmModel> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: labels.len(),
        });
    }
    if labels.positive_count == 0 || labels.negative_count == 0 {
        return Err(Error::DegenerateLabels);
    }
    if cfg.tolerance <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tolerance".into(),
            reason: "must be positive".into(),
        });
    }
    if cfg.c <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "c".into(),
            reason: "must be positive".into(),
        });
    }

    let capped: Option<(Matrix, Vec<u8>)> = match cfg.row_cap {
        Some(cap) if features.rows() > cap && cap >= 2 => {
            let idx = cap_rows(&labels.values, cap, cfg.seed);
            (
                features.select_rows(&idx),
                idx.iter().map(|&i| labels.values[i]).collect(),
            )
                .into()
        }
        _ => None,
    };
    let (x, yv): (&Matrix, Vec<u8>) = match &capped {
        Some((m, y)) => (m, y.clone()),
        None => (features, labels.values.clone()),
    };
    let n = x.rows();
    let kernel = resolve_kernel(cfg.kernel, x);
    let y: Vec<f64> = yv.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();

    let mut smo = Smo {
        x,
        errors: y.iter().map(|v| -v).collect(),
        y,
        kernel,
        c: cfg.c,
        tol: cfg.tolerance,
        alpha: vec![0.0; n],
        bias: 0.0,
    };

    let mut rng = stream_rng(cfg.seed, 0x50);
    let mut quiet_sweeps = 0usize;
    let mut total_sweeps = 0usize;
    let hard_cap = 2000usize;
    let mut refreshes = 0usize;
    let mut converged = true;
    loop {
        if quiet_sweeps >= cfg.max_passes {
            // Quiescent per the incremental error cache. Recompute it exactly
            // before declaring victory: incremental updates drift, and a
            // stale cache can hide a stuck violator.
            smo.refresh_errors();
            if smo.recenter_bias() {
                break;
            }
            refreshes += 1;
            if refreshes > 10 {
                converged = false;
                break;
            }
            quiet_sweeps = 0;
        }
        total_sweeps += 1;
        if total_sweeps > hard_cap {
            converged = false;
            break;
        }
        let mut changed = 0usize;
        for i in 0..n {
            if !smo.violates_kkt(i) {
                continue;
            }
            let start = rng.gen_range(0..n);
            for off in 0..n {
                if smo.take_step(i, (start + off) % n) {
                    changed += 1;
                    break;
                }
            }
        }
        if changed == 0 {
            quiet_sweeps += 1;
        } else {
            quiet_sweeps = 0;
        }
    }

    // Prune non-support vectors.
    let keep: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 1e-10).collect();
    let support_vectors = x.select_rows(&keep);
    let dual_coefficients: Vec<f64> = keep.iter().map(|&i| smo.alpha[i] * smo.y[i]).collect();

    let mut model = SvmModel {
        schema_version: 1,
        support_vectors,
        dual_coefficients,
        bias: smo.bias,
        kernel,
        c: cfg.c,
        platt: None,
        converged,
    };

    // Calibrate on the training split's decision values.
    let decisions: Vec<f64> = (0..x.rows()).map(|i| model.decision_unchecked(x.row(i))).collect();
    model.platt = Some(fit_platt(&decisions, &yv, 10));
    Ok(model)
}

impl SvmModel {
    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coefficients)
            .map(|(sv, coef)| coef * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Signed distance-like score; positive means class 1.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if self.support_vectors.rows() > 0 && x.len() != self.support_vectors.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.support_vectors.cols(),
                got: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision(x)? >= 0.0))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<(f64, f64)> {
        let platt = self.platt.ok_or(Error::CalibrationUnfitted)?;
        let p1 = platt.prob_positive(self.decision(x)?);
        Ok((1.0 - p1, p1))
    }

    /// Max KKT residual of this model's implied dual on a training set.
    /// Used by tests and convergence diagnostics.
    pub fn kkt_residual(alpha: &[f64], y: &[f64], decisions: &[f64], c: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..alpha.len() {
            let margin = y[i] * decisions[i];
            let r = if alpha[i] <= 1e-10 {
                (1.0 - margin).max(0.0)
            } else if alpha[i] >= c - 1e-10 {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(r);
        }
        worst
    }
}
