//! Flow CSV ingestion and model-ready preprocessing: load, clean,
//! label-encode, stratified sampling, train-only min-max scaling and
//! repeated stratified train/test splits.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Identifier-style columns excluded from the feature matrix regardless of
/// how often they parse as numeric. Names are matched after trimming.
const DROPPED_BY_NAME: &[&str] = &[
    "Flow ID",
    "Source IP",
    "Src IP",
    "Destination IP",
    "Dst IP",
    "Source Port",
    "Src Port",
    "Destination Port",
    "Dst Port",
    "Timestamp",
    "Protocol",
    "SimillarHTTP",
    "Unnamed: 0",
];

/// Fraction of rows that must parse as numeric for a column to be kept.
const NUMERIC_RATIO: f64 = 0.99;

/// In-memory form of a flow CSV: numeric feature matrix plus the raw label
/// strings, one per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTable {
    pub column_names: Vec<String>,
    pub features: Matrix,
    pub raw_labels: Vec<String>,
    /// Columns excluded at load time (identifiers or <99% numeric).
    pub dropped_columns: Vec<String>,
    /// Count of NaN/±inf cells observed at load time.
    pub nonfinite_cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelVector {
    pub values: Vec<u8>,
    pub positive_label: String,
    pub negative_count: usize,
    pub positive_count: usize,
}

impl LabelVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rebuild from raw 0/1 values, recomputing the class counts.
    pub fn from_values(values: Vec<u8>, positive_label: &str) -> Self {
        let positive_count = values.iter().filter(|&&v| v == 1).count();
        LabelVector {
            negative_count: values.len() - positive_count,
            positive_count,
            positive_label: positive_label.to_string(),
            values,
        }
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector::from_values(
            indices.iter().map(|&i| self.values[i]).collect(),
            &self.positive_label,
        )
    }
}

/// Per-column min/max/median fitted on a training subset only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalerStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub median: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Deterministic repeated stratified random-subsampling plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub repeats: usize,
    pub splits: Vec<Split>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        // Empty cells are accepted as nonfinite markers for clean().
        return Some(f64::NAN);
    }
    // f64::from_str already accepts "inf", "Infinity", "-Infinity", "NaN"
    // case-insensitively.
    t.parse::<f64>().ok()
}

/// Load a flow CSV: header row, comma delimiter, one column named "Label"
/// after trimming. Numeric columns are kept; identifier columns and columns
/// below the numeric-parse threshold are recorded in `dropped_columns`.
pub fn load_flow_csv(path: &Path) -> Result<FlowTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == "Label")
        .ok_or(Error::MissingLabelColumn)?;

    let mut cells: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        cells.push(record?);
    }
    if cells.is_empty() {
        return Err(Error::EmptyTable);
    }
    let n = cells.len();

    let mut kept: Vec<usize> = Vec::new();
    let mut dropped: Vec<String> = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        if DROPPED_BY_NAME.contains(&name.as_str()) {
            dropped.push(name.clone());
            continue;
        }
        let parseable = cells
            .iter()
            .filter(|row| row.get(j).map_or(false, |c| parse_cell(c).is_some()))
            .count();
        if (parseable as f64) / (n as f64) >= NUMERIC_RATIO {
            kept.push(j);
        } else {
            dropped.push(name.clone());
        }
    }

    let mut features = Matrix::zeros(n, kept.len());
    let mut raw_labels = Vec::with_capacity(n);
    let mut nonfinite = 0usize;
    for (i, row) in cells.iter().enumerate() {
        for (out_j, &j) in kept.iter().enumerate() {
            let v = row
                .get(j)
                .and_then(parse_cell)
                .unwrap_or(f64::NAN);
            if !v.is_finite() {
                nonfinite += 1;
            }
            features.set(i, out_j, v);
        }
        raw_labels.push(
            row.get(label_idx)
                .map(|s| s.trim().to_string())
                .unwrap_or_default(),
        );
    }

    Ok(FlowTable {
        column_names: kept.iter().map(|&j| headers[j].clone()).collect(),
        features,
        raw_labels,
        dropped_columns: dropped,
        nonfinite_cells: nonfinite,
    })
}

/// Write a table back out in the same CSV dialect (features + Label column).
pub fn write_flow_csv(table: &FlowTable, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = table.column_names.clone();
    header.push("Label".to_string());
    writeln!(file, "{}", header.join(","))?;
    for i in 0..table.features.rows() {
        let mut row: Vec<String> = table
            .features
            .row(i)
            .iter()
            .map(|v| format_csv_value(*v))
            .collect();
        row.push(table.raw_labels[i].clone());
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

fn format_csv_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v == f64::INFINITY {
        "Infinity".to_string()
    } else if v == f64::NEG_INFINITY {
        "-Infinity".to_string()
    } else {
        // Shortest round-trip representation keeps reload bit-exact.
        format!("{v}")
    }
}

fn finite_median(values: &[f64]) -> Option<f64> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    finite.sort_by(f64::total_cmp);
    let m = finite.len();
    Some(if m % 2 == 1 {
        finite[m / 2]
    } else {
        (finite[m / 2 - 1] + finite[m / 2]) / 2.0
    })
}

/// Remove constant columns and replace every nonfinite cell with its column's
/// finite median. Idempotent; the result satisfies the all-finite invariant.
pub fn clean(table: &FlowTable) -> Result<FlowTable> {
    let n = table.features.rows();
    let d = table.features.cols();
    let mut kept_cols: Vec<usize> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let raw: Vec<f64> = (0..n).map(|i| table.features.get(i, j)).collect();
        let Some(median) = finite_median(&raw) else {
            continue; // no finite value at all: nothing to impute from
        };
        let imputed: Vec<f64> = raw
            .iter()
            .map(|v| if v.is_finite() { *v } else { median })
            .collect();
        let constant = imputed.iter().all(|v| *v == imputed[0]);
        if !constant {
            kept_cols.push(j);
            columns.push(imputed);
        }
    }
    if kept_cols.is_empty() {
        return Err(Error::NoInformativeFeatures);
    }
    let mut features = Matrix::zeros(n, kept_cols.len());
    for (out_j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            features.set(i, out_j, *v);
        }
    }
    Ok(FlowTable {
        column_names: kept_cols
            .iter()
            .map(|&j| table.column_names[j].clone())
            .collect(),
        features,
        raw_labels: table.raw_labels.clone(),
        dropped_columns: table.dropped_columns.clone(),
        nonfinite_cells: table.nonfinite_cells,
    })
}

/// Map raw labels to {0,1}: rows equal to `positive_label` become 1.
pub fn encode_labels(table: &FlowTable, positive_label: &str) -> Result<LabelVector> {
    if !table.raw_labels.iter().any(|l| l == positive_label) {
        return Err(Error::PositiveLabelNotFound(positive_label.to_string()));
    }
    let values: Vec<u8> = table
        .raw_labels
        .iter()
        .map(|l| u8::from(l == positive_label))
        .collect();
    let positive_count = values.iter().filter(|&&v| v == 1).count();
    let negative_count = values.len() - positive_count;
    if negative_count == 0 || positive_count == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(LabelVector {
        values,
        positive_label: positive_label.to_string(),
        negative_count,
        positive_count,
    })
}

fn round_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Indices of a stratified subsample: per-class counts are
/// round(fraction * class count), shuffled deterministically by `seed`.
pub fn stratified_sample_indices(
    labels: &LabelVector,
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "fraction".into(),
            reason: format!("{fraction} not in (0, 1]"),
        });
    }
    let n = labels.len();
    if round_count(fraction, n) < 2 {
        return Err(Error::InvalidParameter {
            name: "fraction".into(),
            reason: "sample would have fewer than 2 rows".into(),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let mut selected: Vec<usize> = Vec::new();
    for class in [0u8, 1u8] {
        let mut class_rows: Vec<usize> = (0..n).filter(|&i| labels.values[i] == class).collect();
        let take = round_count(fraction, class_rows.len());
        if take == 0 {
            return Err(Error::ClassVanished);
        }
        class_rows.shuffle(&mut rng);
        selected.extend_from_slice(&class_rows[..take]);
    }
    selected.shuffle(&mut rng);
    Ok(selected)
}

pub fn stratified_sample(
    table: &FlowTable,
    labels: &LabelVector,
    fraction: f64,
    seed: u64,
) -> Result<(FlowTable, LabelVector)> {
    let indices = stratified_sample_indices(labels, fraction, seed)?;
    let sampled = FlowTable {
        column_names: table.column_names.clone(),
        features: table.features.select_rows(&indices),
        raw_labels: indices.iter().map(|&i| table.raw_labels[i].clone()).collect(),
        dropped_columns: table.dropped_columns.clone(),
        nonfinite_cells: 0,
    };
    Ok((sampled, labels.select(&indices)))
}

/// Per-column min/max/median over the training rows only.
pub fn fit_scaler(table: &FlowTable, train_indices: &[usize]) -> Result<ScalerStats> {
    if train_indices.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = table.features.cols();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    let mut median = vec![0.0; d];
    for j in 0..d {
        let col: Vec<f64> = train_indices
            .iter()
            .map(|&i| table.features.get(i, j))
            .collect();
        for &v in &col {
            if v.is_finite() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        median[j] = finite_median(&col).unwrap_or(0.0);
        if !min[j].is_finite() {
            min[j] = 0.0;
            max[j] = 0.0;
        }
    }
    Ok(ScalerStats { min, max, median })
}

/// Min-max scale to the training range: (v - min) / (max - min).
/// Constant columns map to 0.0; out-of-range test values are not clipped.
pub fn apply_scaler(table: &FlowTable, stats: &ScalerStats) -> Result<FlowTable> {
    let d = table.features.cols();
    if stats.min.len() != d {
        return Err(Error::DimensionMismatch {
            expected: stats.min.len(),
            got: d,
        });
    }
    let mut features = table.features.clone();
    for i in 0..features.rows() {
        let row = features.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let range = stats.max[j] - stats.min[j];
            *v = if range == 0.0 {
                0.0
            } else {
                (*v - stats.min[j]) / range
            };
        }
    }
    Ok(FlowTable {
        column_names: table.column_names.clone(),
        features,
        raw_labels: table.raw_labels.clone(),
        dropped_columns: table.dropped_columns.clone(),
        nonfinite_cells: table.nonfinite_cells,
    })
}

/// Build `repeats` stratified train/test splits. Each repeat draws from its
/// own RNG stream derived from (seed, repeat index), so the first r splits
/// of a larger plan equal the r-repeat plan.
pub fn make_splits(
    n: usize,
    labels: &LabelVector,
    train_fraction: f64,
    repeats: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "train_fraction".into(),
            reason: format!("{train_fraction} not in (0, 1)"),
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats".into(),
            reason: "must be positive".into(),
        });
    }
    let n_train = round_count(train_fraction, n);
    if n_train < 2 || n_train >= n {
        return Err(Error::TrainSetTooSmall);
    }
    if labels.positive_count == 0 || labels.negative_count == 0 {
        return Err(Error::DegenerateLabels);
    }

    // Per-class train counts: stratified within +/-1, forced >= 1 per class
    // so every train set contains both classes.
    let mut pos_take = round_count(train_fraction, labels.positive_count);
    let mut neg_take = n_train - pos_take.min(n_train);
    if pos_take == 0 {
        pos_take = 1;
        neg_take = n_train - 1;
    }
    if neg_take == 0 {
        neg_take = 1;
        pos_take = n_train - 1;
    }
    if pos_take > labels.positive_count || neg_take > labels.negative_count {
        return Err(Error::TrainSetTooSmall);
    }

    let pos_rows: Vec<usize> = (0..n).filter(|&i| labels.values[i] == 1).collect();
    let neg_rows: Vec<usize> = (0..n).filter(|&i| labels.values[i] == 0).collect();

    let mut splits = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut rng = stream_rng(seed, r as u64);
        let mut pos = pos_rows.clone();
        let mut neg = neg_rows.clone();
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let mut train: Vec<usize> = pos[..pos_take]
            .iter()
            .chain(neg[..neg_take].iter())
            .copied()
            .collect();
        let mut test: Vec<usize> = pos[pos_take..]
            .iter()
            .chain(neg[neg_take..].iter())
            .copied()
            .collect();
        train.sort_unstable();
        test.sort_unstable();
        splits.push(Split { train, test });
    }
    Ok(SplitPlan {
        seed,
        train_fraction,
        repeats,
        splits,
    })
}
