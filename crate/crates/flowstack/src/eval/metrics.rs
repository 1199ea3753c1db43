use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// CA plus class-support-weighted precision/recall/F1. Weighted recall is
/// algebraically identical to CA, the pattern visible in per-class-support
/// averaged reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub ca: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fn_ += 1,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "labels".into(),
                    reason: "values must be 0 or 1".into(),
                })
            }
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0 // zero-denominator metric defined as 0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<MetricScores> {
    let n = cm.total();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let nf = n as f64;
    let support_pos = cm.tp + cm.fn_;
    let support_neg = cm.tn + cm.fp;

    let precision_pos = ratio(cm.tp, cm.tp + cm.fp);
    let recall_pos = ratio(cm.tp, support_pos);
    let precision_neg = ratio(cm.tn, cm.tn + cm.fn_);
    let recall_neg = ratio(cm.tn, support_neg);

    let ca = (cm.tp + cm.tn) as f64 / nf;
    let precision = (support_pos as f64 * precision_pos + support_neg as f64 * precision_neg) / nf;
    // Support-weighted recall telescopes to (tp + tn) / n, i.e. exactly CA.
    let recall = ca;
    let f1 = (support_pos as f64 * f1_of(precision_pos, recall_pos)
        + support_neg as f64 * f1_of(precision_neg, recall_neg))
        / nf;
    Ok(MetricScores {
        ca,
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_confusion() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fn_: 1,
                tn: 2,
                fp: 0
            }
        );
    }

    #[test]
    fn perfect_prediction_has_no_errors() {
        let y = [1, 0, 1, 1, 0];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
    }

    #[test]
    fn inverted_predictions_swap_cells() {
        let y = [1u8, 0, 1, 1, 0];
        let inv: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let perfect = confusion(&y, &y).unwrap();
        let inverted = confusion(&y, &inv).unwrap();
        assert_eq!(inverted.fn_, perfect.tp);
        assert_eq!(inverted.fp, perfect.tn);
        assert_eq!((inverted.tp, inverted.tn), (0, 0));
    }

    #[test]
    fn confusion_length_mismatch() {
        assert!(confusion(&[1, 0], &[1]).is_err());
    }

    #[test]
    fn confusion_empty() {
        assert!(matches!(confusion(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn weighted_metrics_hand_computed() {
        // tp=2 fp=1 tn=6 fn=1: ca=0.8; weighted P = (3*(2/3)+7*(6/7))/10 = 0.8
        let cm = ConfusionMatrix {
            tp: 2,
            fp: 1,
            tn: 6,
            fn_: 1,
        };
        let m = metrics_from_confusion(&cm).unwrap();
        assert!((m.ca - 0.8).abs() < 1e-15);
        assert!((m.precision - 0.8).abs() < 1e-12);
        assert_eq!(m.recall, m.ca);
    }

    #[test]
    fn perfect_classifier_scores_one() {
        let cm = ConfusionMatrix {
            tp: 5,
            fp: 0,
            tn: 5,
            fn_: 0,
        };
        let m = metrics_from_confusion(&cm).unwrap();
        assert_eq!((m.ca, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_negative_predictions_on_imbalanced_data() {
        // 9:1 negative:positive, predict all negative.
        let cm = ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 9,
            fn_: 1,
        };
        let m = metrics_from_confusion(&cm).unwrap();
        assert!((m.ca - 0.9).abs() < 1e-15);
        assert_eq!(m.recall, m.ca);
        // Class-1 recall is 0; it only shows up through the weighting.
        assert!(m.f1 < m.ca);
    }

    #[test]
    fn weighted_recall_equals_ca_exactly() {
        let mut rng = crate::rng::stream_rng(50, 0);
        use rand::Rng;
        for _ in 0..1000 {
            let cm = ConfusionMatrix {
                tp: rng.gen_range(0..50),
                fp: rng.gen_range(0..50),
                tn: rng.gen_range(0..50),
                fn_: rng.gen_range(0..50),
            };
            if cm.total() == 0 {
                continue;
            }
            let m = metrics_from_confusion(&cm).unwrap();
            assert_eq!(m.recall, m.ca);
        }
    }
}
