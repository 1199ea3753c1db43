use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::flowdata::{FlowTable, LabelVector};
use crate::matrix::Matrix;
use crate::rng::{stream_rng, STREAM_SYNTH};
use crate::{Error, Result};

pub const SYNTH_POSITIVE_LABEL: &str = "DrDoS_NTP";
pub const SYNTH_NEGATIVE_LABEL: &str = "BENIGN";

/// Two spherical unit-variance Gaussian clusters separated by `separation`
/// along the first coordinate. For balanced classes the Bayes accuracy is
/// Phi(separation / 2) in closed form, which makes this a calibrated bench.
pub fn synth_flows(
    n: usize,
    d: usize,
    separation: f64,
    class_balance: f64,
    seed: u64,
) -> Result<(FlowTable, LabelVector)> {
    if n < 4 {
        return Err(Error::InvalidParameter {
            name: "n".into(),
            reason: "need at least 4 rows".into(),
        });
    }
    if d < 1 {
        return Err(Error::InvalidParameter {
            name: "d".into(),
            reason: "need at least 1 feature".into(),
        });
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "separation".into(),
            reason: "must be finite and nonnegative".into(),
        });
    }
    let n_pos = (class_balance * n as f64).round() as usize;
    if !(0.0..=1.0).contains(&class_balance) || n_pos == 0 || n_pos == n {
        return Err(Error::InvalidParameter {
            name: "class_balance".into(),
            reason: "each class needs at least one row".into(),
        });
    }

    let mut rng = stream_rng(seed, STREAM_SYNTH);
    let mut classes: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    classes.shuffle(&mut rng);

    let mut features = Matrix::zeros(n, d);
    let mut raw_labels = Vec::with_capacity(n);
    for i in 0..n {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        if classes[i] == 1 {
            row[0] += separation;
        }
        raw_labels.push(
            if classes[i] == 1 {
                SYNTH_POSITIVE_LABEL
            } else {
                SYNTH_NEGATIVE_LABEL
            }
            .to_string(),
        );
    }

    let table = FlowTable {
        column_names: (0..d).map(|j| format!("f{j}")).collect(),
        features,
        raw_labels,
        dropped_columns: vec![],
        nonfinite_cells: 0,
    };
    let labels = LabelVector::from_values(classes, SYNTH_POSITIVE_LABEL);
    Ok((table, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts_match_balance() {
        let (_, labels) = synth_flows(1000, 3, 2.0, 0.3, 1).unwrap();
        assert_eq!(labels.positive_count, 300);
        assert_eq!(labels.negative_count, 700);
    }

    #[test]
    fn deterministic_under_seed() {
        let (a, _) = synth_flows(100, 4, 1.5, 0.5, 9).unwrap();
        let (b, _) = synth_flows(100, 4, 1.5, 0.5, 9).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.raw_labels, b.raw_labels);
    }

    #[test]
    fn separation_shifts_first_coordinate() {
        let (table, labels) = synth_flows(4000, 2, 3.0, 0.5, 2).unwrap();
        let mean_of = |class: u8| {
            let rows: Vec<f64> = (0..4000)
                .filter(|&i| labels.values[i] == class)
                .map(|i| table.features.get(i, 0))
                .collect();
            rows.iter().sum::<f64>() / rows.len() as f64
        };
        let gap = mean_of(1) - mean_of(0);
        assert!((gap - 3.0).abs() < 0.15, "gap={gap}");
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(synth_flows(3, 2, 1.0, 0.5, 1).is_err());
        assert!(synth_flows(100, 0, 1.0, 0.5, 1).is_err());
        assert!(synth_flows(100, 2, 1.0, 0.0, 1).is_err());
        assert!(synth_flows(100, 2, f64::NAN, 0.5, 1).is_err());
    }
}
