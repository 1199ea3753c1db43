use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use crate::flowdata::LabelVector;
use crate::matrix::Matrix;
use crate::{Error, Result};

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Brute-force k nearest rows, sorted by (distance, row index). This is the
/// semantic contract the kd-tree must match exactly.
pub fn brute_force_neighbors(train: &Matrix, query: &[f64], k: usize) -> Vec<usize> {
    let mut dists: Vec<(f64, usize)> = (0..train.rows())
        .map(|i| {
            let d2: f64 = train
                .row(i)
                .iter()
                .zip(query)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            (d2, i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Frozen kNN classifier: training data stored verbatim plus a kd-tree index
/// whose neighbor sets equal brute force exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub schema_version: u32,
    pub train_features: Matrix,
    pub train_labels: Vec<u8>,
    pub k: usize,
    #[serde(skip)]
    index: KdTree,
}

pub fn knn_fit(features: Matrix, labels: &LabelVector, k: usize) -> Result<KnnModel> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k".into(),
            reason: "must be at least 1".into(),
        });
    }
    if k > features.rows() {
        return Err(Error::KTooLarge {
            k,
            rows: features.rows(),
        });
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
    let index = KdTree::build(&features);
    Ok(KnnModel {
        schema_version: 1,
        train_labels: labels.values.clone(),
        k,
        index,
        train_features: features,
    })
}

impl KnnModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.train_features.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.train_features.cols(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// The k nearest training-row indices, sorted by (distance, row index).
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        if self.index.is_empty() {
            // Index is not serialized; fall back after deserialization.
            return Ok(brute_force_neighbors(&self.train_features, x, self.k));
        }
        Ok(self.index.nearest(&self.train_features, x, self.k))
    }

    /// (p0, p1) with p1 = positive neighbors / k.
    pub fn predict_proba(&self, x: &[f64]) -> Result<(f64, f64)> {
        let neighbors = self.neighbors(x)?;
        let positives = neighbors
            .iter()
            .filter(|&&i| self.train_labels[i] == 1)
            .count();
        // Both halves computed from counts so a 0<->1 label swap mirrors the
        // pair bit-for-bit.
        let p1 = positives as f64 / self.k as f64;
        let p0 = (self.k - positives) as f64 / self.k as f64;
        Ok((p0, p1))
    }

    /// Argmax class; an exact probability tie falls back to the label of the
    /// single nearest neighbor.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        let neighbors = self.neighbors(x)?;
        let positives = neighbors
            .iter()
            .filter(|&&i| self.train_labels[i] == 1)
            .count();
        let negatives = self.k - positives;
        Ok(match positives.cmp(&negatives) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.train_labels[neighbors[0]],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn labels(values: Vec<u8>) -> LabelVector {
        LabelVector::from_values(values, "x")
    }

    #[test]
    fn distance_three_four_five() {
        assert_eq!(
            euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            5.0
        );
    }

    #[test]
    fn distance_identity() {
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn distance_dimension_mismatch() {
        assert!(euclidean_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn distance_matches_formula_on_random_pairs() {
        let mut rng = crate::rng::stream_rng(17, 0);
        for _ in 0..100 {
            let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let direct = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((euclidean_distance(&a, &b).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_boundary_k() {
        let m = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(knn_fit(m.clone(), &labels(vec![0, 1, 0]), 3).is_ok());
        assert!(matches!(
            knn_fit(m, &labels(vec![0, 1, 0]), 4),
            Err(Error::KTooLarge { .. })
        ));
    }

    #[test]
    fn fit_rejects_single_class() {
        let m = Matrix::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            knn_fit(m, &labels(vec![1, 1]), 1),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn exact_match_k1() {
        let m = Matrix::from_rows(vec![vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let model = knn_fit(m, &labels(vec![0, 1]), 1).unwrap();
        assert_eq!(model.predict_proba(&[5.0, 5.0]).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn three_neighbor_vote() {
        let m =
            Matrix::from_rows(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0]]).unwrap();
        let model = knn_fit(m, &labels(vec![0, 0, 1]), 3).unwrap();
        let (p0, p1) = model.predict_proba(&[0.1, 0.1]).unwrap();
        assert!((p0 - 2.0 / 3.0).abs() < 1e-15);
        assert!((p1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(model.predict(&[0.1, 0.1]).unwrap(), 0);
    }

    #[test]
    fn probability_tie_uses_nearest_neighbor_label() {
        let m = Matrix::from_rows(vec![vec![0.0], vec![3.0]]).unwrap();
        let model = knn_fit(m, &labels(vec![1, 0]), 2).unwrap();
        let (p0, p1) = model.predict_proba(&[1.0]).unwrap();
        assert_eq!((p0, p1), (0.5, 0.5));
        assert_eq!(model.predict(&[1.0]).unwrap(), 1);
    }

    #[test]
    fn distance_tie_at_kth_rank_prefers_lower_index() {
        // Rows 1 and 2 are equidistant from the query; k=2 must keep row 1.
        let m = Matrix::from_rows(vec![vec![0.0], vec![2.0], vec![-2.0]]).unwrap();
        let model = knn_fit(m, &labels(vec![0, 1, 0]), 2).unwrap();
        assert_eq!(model.neighbors(&[0.0]).unwrap(), vec![0, 1]);
    }

    #[test]
    fn index_matches_brute_force_on_random_data() {
        let mut rng = crate::rng::stream_rng(5, 0);
        let n = 300;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let m = Matrix::from_rows(rows).unwrap();
        let y = labels((0..n).map(|i| (i % 2) as u8).collect());
        for k in [1usize, 5, 20] {
            let model = knn_fit(m.clone(), &y, k).unwrap();
            for _ in 0..50 {
                let q: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
                assert_eq!(
                    model.neighbors(&q).unwrap(),
                    brute_force_neighbors(&m, &q, k)
                );
            }
        }
    }

    #[test]
    fn probabilities_are_multiples_of_one_over_k() {
        let mut rng = crate::rng::stream_rng(6, 0);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let m = Matrix::from_rows(rows).unwrap();
        let y = labels((0..40).map(|i| u8::from(i % 3 == 0)).collect());
        let model = knn_fit(m, &y, 5).unwrap();
        for _ in 0..20 {
            let q = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let (p0, p1) = model.predict_proba(&q).unwrap();
            assert_eq!(p0 + p1, 1.0);
            assert_eq!((p1 * 5.0).fract(), 0.0);
        }
    }

    #[test]
    fn label_swap_swaps_probability_pair() {
        let mut rng = crate::rng::stream_rng(8, 0);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let m = Matrix::from_rows(rows).unwrap();
        let yv: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let flipped: Vec<u8> = yv.iter().map(|v| 1 - v).collect();
        let a = knn_fit(m.clone(), &labels(yv), 3).unwrap();
        let b = knn_fit(m, &labels(flipped), 3).unwrap();
        for _ in 0..20 {
            let q = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let (pa0, pa1) = a.predict_proba(&q).unwrap();
            let (pb0, pb1) = b.predict_proba(&q).unwrap();
            assert_eq!((pa0, pa1), (pb1, pb0));
        }
    }
}
