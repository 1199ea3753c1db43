use serde::{Deserialize, Serialize};

/// Sigmoid calibration over decision values: p1 = 1 / (1 + exp(a*f + b)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

impl PlattParams {
    pub fn prob_positive(&self, decision: f64) -> f64 {
        let z = self.a * decision + self.b;
        // Numerically stable logistic.
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Fit the sigmoid by Newton's method with backtracking (Lin, Lin & Weng's
/// robust variant of Platt's procedure), with prior-corrected targets.
pub fn fit_platt(decisions: &[f64], labels: &[u8], iterations: usize) -> PlattParams {
    let n = decisions.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = n as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 1 { hi } else { lo })
        .collect();

    let mut a = 0.0f64;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let min_step = 1e-10;
    let sigma = 1e-12; // Hessian ridge

    let objective = |a: f64, b: f64| -> f64 {
        let mut obj = 0.0;
        for (f, t) in decisions.iter().zip(&targets) {
            let z = a * f + b;
            // t*z + log(1 + exp(-z)) computed stably for either sign of z.
            obj += if z >= 0.0 {
                t * z + (1.0 + (-z).exp()).ln()
            } else {
                (t - 1.0) * z + (1.0 + z.exp()).ln()
            };
        }
        obj
    };

    let mut fval = objective(a, b);
    for _ in 0..iterations {
        let (mut h11, mut h22, mut h21) = (sigma, sigma, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (f, t) in decisions.iter().zip(&targets) {
            let z = a * f + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nval = objective(na, nb);
            if nval < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nval;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    PlattParams { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_offset_is_half() {
        let p = PlattParams { a: -2.0, b: 0.0 };
        assert_eq!(p.prob_positive(0.0), 0.5);
    }

    #[test]
    fn monotone_when_a_negative() {
        let p = PlattParams { a: -1.5, b: 0.3 };
        let mut last = 0.0;
        for i in 0..20 {
            let v = p.prob_positive(-5.0 + i as f64 * 0.5);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn separable_fit_is_confident_at_margin() {
        // 50 per class: decision -2..-1 for negatives, 1..2 for positives.
        let mut decisions = Vec::new();
        let mut labels = Vec::new();
        for i in 0..50 {
            decisions.push(-2.0 + i as f64 / 50.0);
            labels.push(0u8);
            decisions.push(1.0 + i as f64 / 50.0);
            labels.push(1u8);
        }
        let p = fit_platt(&decisions, &labels, 10);
        assert!(p.a < 0.0);
        assert!(p.prob_positive(1.0) > 0.9, "p={}", p.prob_positive(1.0));
        assert!(p.prob_positive(-1.0) < 0.1);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let p = PlattParams { a: -10.0, b: 0.0 };
        assert!(p.prob_positive(1e6) > 0.999);
        assert!(p.prob_positive(1e6) <= 1.0);
        assert!(p.prob_positive(-1e6) >= 0.0);
    }
}
