//! One-vs-rest linear SVM trained by dual coordinate descent.
//!
//! Each binary subproblem solves the L1-loss SVM dual
//! `min 1/2 a^T Q a - e^T a` with `0 <= a <= C` over features augmented
//! with a constant 1, so the bias is learned (and regularized) jointly.

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{LinearSvmParams, LinearWeights};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::seed::stream_rng;

const PG_TOL: f64 = 1e-8;
const MAX_PASSES: usize = 2000;

fn train_one_class(
    x: &Array2<f64>,
    y: &[usize],
    class: usize,
    c_reg: f64,
    seed: u64,
) -> (Vec<f64>, f64) {
    let n = x.nrows();
    let k = x.ncols();
    let targets: Vec<f64> = y.iter().map(|&c| if c == class { 1.0 } else { -1.0 }).collect();
    // Augmented feature (x, 1); w has k + 1 entries, the last is the bias.
    let q_diag: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; k + 1];
    let mut rng = stream_rng(seed, &[0x6c7376, class as u64]);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_PASSES {
        order.shuffle(&mut rng);
        let mut max_pg = 0.0_f64;
        for &i in &order {
            let xi = x.row(i);
            let t = targets[i];
            let wx: f64 = xi.iter().zip(&w[..k]).map(|(a, b)| a * b).sum::<f64>() + w[k];
            let g = t * wx - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c_reg {
                g.max(0.0)
            } else {
                g
            };
            if pg.abs() > 1e-14 {
                max_pg = max_pg.max(pg.abs());
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c_reg);
                let delta = (alpha[i] - old) * t;
                if delta != 0.0 {
                    for (wj, xj) in w[..k].iter_mut().zip(xi.iter()) {
                        *wj += delta * xj;
                    }
                    w[k] += delta;
                }
            }
        }
        if max_pg < PG_TOL {
            break;
        }
    }
    let bias = w.pop().unwrap();
    (w, bias)
}

pub fn train_linear_svm(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    p: &LinearSvmParams,
    seed: u64,
) -> Result<LinearWeights> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension("rows and labels differ".into()));
    }
    let trained = par_map(n_classes, |c| train_one_class(x, y, c, p.c, seed));
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    for (w, b) in trained {
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearWeights { weights, biases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_point_boundary_sits_at_the_midpoint() {
        // x = 0 (class 0) and x = 1 (class 1): the max-margin boundary is
        // x = 0.5 by symmetry.
        let x = array![[0.0], [1.0]];
        let y = vec![0, 1];
        let p = LinearSvmParams { c: 10.0 };
        let lw = train_linear_svm(&x, &y, 2, &p, 1).unwrap();
        // Decision for class 1 vs class 0 crosses zero where the scores tie.
        let s = |v: f64, c: usize| lw.weights[c][0] * v + lw.biases[c];
        // Bisect the score difference for the boundary location.
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if s(mid, 1) - s(mid, 0) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let boundary = 0.5 * (lo + hi);
        assert!(
            (boundary - 0.5).abs() < 1e-6,
            "boundary at {boundary}, want 0.5"
        );
        assert!(s(0.0, 0) > s(0.0, 1), "x=0 classified as class 0");
        assert!(s(1.0, 1) > s(1.0, 0), "x=1 classified as class 1");
    }

    #[test]
    fn class_one_model_matches_hand_solved_dual() {
        // For +1 at x=1 and -1 at x=0 with augmented features, the dual
        // optimum is alpha = (3, 2), giving w = 2, b = -1.
        let x = array![[0.0], [1.0]];
        let y = vec![0, 1];
        let p = LinearSvmParams { c: 10.0 };
        let lw = train_linear_svm(&x, &y, 2, &p, 1).unwrap();
        assert!((lw.weights[1][0] - 2.0).abs() < 1e-6, "w = {}", lw.weights[1][0]);
        assert!((lw.biases[1] + 1.0).abs() < 1e-6, "b = {}", lw.biases[1]);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        use rand::Rng;
        let mut rng = crate::seed::stream_rng(2, &[77]);
        let x = Array2::from_shape_fn((40, 3), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let p = LinearSvmParams { c: 1.0 };
        let a = train_linear_svm(&x, &y, 4, &p, 5).unwrap();
        let b = train_linear_svm(&x, &y, 4, &p, 5).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.biases, b.biases);
    }
}
