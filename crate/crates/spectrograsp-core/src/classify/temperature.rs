//! Single-parameter probability calibration.
//!
//! A temperature divides all class scores before the softmax. It is fit by
//! minimizing the negative log-likelihood on a held-out slice, which cannot
//! change the argmax — only how honest the probabilities are.

use ndarray::Array2;

const TAU_MIN: f64 = 0.05;
const TAU_MAX: f64 = 50.0;

/// Numerically stable softmax of `scores / tau`. Exponentials are floored at
/// a tiny positive value so every output entry stays strictly positive even
/// for extreme score gaps.
pub fn softmax_with_temperature(scores: &[f64], tau: f64) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / tau).exp().max(1e-300))
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn nll(scores: &Array2<f64>, y: &[usize], tau: f64) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = scores.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse: f64 = row.iter().map(|s| ((s - max) / tau).exp()).sum::<f64>().ln();
        total -= (row[yi] - max) / tau - lse;
    }
    total / y.len().max(1) as f64
}

/// Golden-section search for the NLL-minimizing temperature over
/// `[TAU_MIN, TAU_MAX]` in log space. Deterministic.
pub fn fit_temperature(scores: &Array2<f64>, y: &[usize]) -> f64 {
    if y.is_empty() {
        return 1.0;
    }
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut lo = TAU_MIN.ln();
    let mut hi = TAU_MAX.ln();
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = nll(scores, y, x1.exp());
    let mut f2 = nll(scores, y, x2.exp());
    for _ in 0..100 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = nll(scores, y, x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = nll(scores, y, x2.exp());
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_sums_to_one_and_is_positive() {
        let p = softmax_with_temperature(&[3.0, -1.0, 0.5, 900.0, -900.0], 0.7);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn equal_scores_give_uniform() {
        let p = softmax_with_temperature(&[2.5, 2.5], 1.3);
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn temperature_preserves_argmax() {
        let s = [0.1, 2.0, -1.0, 1.9];
        for tau in [0.05, 0.3, 1.0, 7.0, 50.0] {
            let p = softmax_with_temperature(&s, tau);
            let best = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(best, 1);
        }
    }

    #[test]
    fn overconfident_scores_fit_a_high_temperature() {
        // Scores claim near-certainty but labels are wrong half the time:
        // the NLL optimum must soften the probabilities.
        let scores = array![
            [10.0, 0.0],
            [10.0, 0.0],
            [0.0, 10.0],
            [0.0, 10.0],
            [10.0, 0.0],
            [0.0, 10.0],
        ];
        let y = vec![0, 1, 1, 0, 0, 1];
        let tau = fit_temperature(&scores, &y);
        assert!(tau > 5.0, "expected a softening temperature, got {tau}");
    }

    #[test]
    fn well_separated_scores_fit_a_sharp_temperature() {
        let scores = array![[2.0, 0.0], [2.1, 0.0], [0.0, 2.0], [0.0, 1.9]];
        let y = vec![0, 0, 1, 1];
        let tau = fit_temperature(&scores, &y);
        assert!(tau < 1.0, "expected a sharpening temperature, got {tau}");
    }

    #[test]
    fn empty_slice_defaults_to_unit_temperature() {
        let scores = Array2::<f64>::zeros((0, 3));
        assert_eq!(fit_temperature(&scores, &[]), 1.0);
    }
}
