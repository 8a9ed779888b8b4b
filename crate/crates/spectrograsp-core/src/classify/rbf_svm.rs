//! One-vs-one RBF-kernel SVM trained by sequential minimal optimization.
//!
//! Each class pair solves the dual
//! `min 1/2 a^T Q a - e^T a,  0 <= a <= C,  sum(y a) = 0`
//! with `Q_ts = y_t y_s K(x_t, x_s)` and `K(u, v) = exp(-gamma ||u-v||^2)`.
//! The working set is the maximal-KKT-violation pair; optimization stops
//! when the duality-gap bound `m(a) - M(a)` drops below the tolerance, so
//! every training point satisfies the KKT conditions within `tol / 2`.
//! Support vectors are deduplicated across pairs so one prediction computes
//! each unique kernel column once.

use std::collections::HashMap;

use ndarray::Array2;

use super::{PairClassifier, RbfSvmParams, RbfWeights};
use crate::error::{Error, Result};
use crate::par::par_map;

/// Stopping tolerance on the maximal KKT violation gap.
pub const SMO_TOL: f64 = 1e-3;
/// Threshold below which a multiplier is treated as zero.
const ALPHA_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BinarySvmSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Solve one binary subproblem. `targets` must be +/-1 with both signs
/// present. Deterministic: ties in working-set selection resolve to the
/// lowest index.
pub fn train_binary_rbf(
    x: &Array2<f64>,
    targets: &[f64],
    c: f64,
    gamma: f64,
    tol: f64,
) -> Result<BinarySvmSolution> {
    let n = x.nrows();
    if targets.len() != n {
        return Err(Error::Dimension("targets and rows differ".into()));
    }
    if !targets.iter().any(|t| *t > 0.0) || !targets.iter().any(|t| *t < 0.0) {
        return Err(Error::Training("binary SVM needs both classes".into()));
    }

    // Full Gram matrix; subproblems are small (hundreds of points).
    let rows: Vec<&[f64]> = (0..n).map(|i| x.row(i).to_slice().unwrap()).collect();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rbf_kernel(rows[i], rows[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n]; // gradient of the dual at alpha = 0
    let max_iter = 10_000.max(100 * n);
    let mut iterations = 0;
    let mut converged = false;

    let select = |alpha: &[f64], grad: &[f64]| -> (usize, f64, usize, f64) {
        let mut i_best = usize::MAX;
        let mut m_val = f64::NEG_INFINITY;
        let mut j_best = usize::MAX;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let v = -targets[t] * grad[t];
            let in_up = (targets[t] > 0.0 && alpha[t] < c) || (targets[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (targets[t] < 0.0 && alpha[t] < c) || (targets[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m_val {
                m_val = v;
                i_best = t;
            }
            if in_low && v < big_m {
                big_m = v;
                j_best = t;
            }
        }
        (i_best, m_val, j_best, big_m)
    };

    for iter in 0..max_iter {
        iterations = iter;
        let (i, m_val, j, big_m) = select(&alpha, &grad);
        if i == usize::MAX || j == usize::MAX || m_val - big_m <= tol {
            converged = true;
            break;
        }
        let quad =
            (kernel[i * n + i] + kernel[j * n + j] - 2.0 * kernel[i * n + j]).max(1e-12);
        let mut delta = (m_val - big_m) / quad;
        let cap_i = if targets[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if targets[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        delta = delta.min(cap_i).min(cap_j);
        let da_i = targets[i] * delta;
        let da_j = -targets[j] * delta;
        alpha[i] = (alpha[i] + da_i).clamp(0.0, c);
        alpha[j] = (alpha[j] + da_j).clamp(0.0, c);
        for t in 0..n {
            grad[t] += targets[t]
                * (targets[i] * kernel[t * n + i] * da_i
                    + targets[j] * kernel[t * n + j] * da_j);
        }
    }

    // Interior points satisfy b = -y_t grad_t exactly at the optimum, and
    // -y grad lies in [M, m] for them; the midpoint bounds every KKT
    // violation by (m - M)/2.
    let (i, m_val, j, big_m) = select(&alpha, &grad);
    let bias = if i != usize::MAX && j != usize::MAX {
        0.5 * (m_val + big_m)
    } else {
        0.0
    };
    Ok(BinarySvmSolution {
        alpha,
        bias,
        iterations,
        converged,
    })
}

/// Maximal KKT violation of a solution over its training points:
/// `a = 0` requires `y f >= 1`, `a = C` requires `y f <= 1`, interior
/// multipliers require `y f = 1`; violations are measured as positive slack.
pub fn kkt_violation(
    x: &Array2<f64>,
    targets: &[f64],
    solution: &BinarySvmSolution,
    c: f64,
    gamma: f64,
) -> f64 {
    let n = x.nrows();
    let rows: Vec<&[f64]> = (0..n).map(|i| x.row(i).to_slice().unwrap()).collect();
    let mut worst = 0.0_f64;
    for t in 0..n {
        let mut f = solution.bias;
        for s in 0..n {
            if solution.alpha[s] > ALPHA_EPS {
                f += solution.alpha[s] * targets[s] * rbf_kernel(rows[s], rows[t], gamma);
            }
        }
        let margin = targets[t] * f;
        let a = solution.alpha[t];
        let violation = if a <= ALPHA_EPS {
            (1.0 - margin).max(0.0)
        } else if a >= c - ALPHA_EPS {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// Train all one-vs-one pairs over the classes present in `y`.
pub fn train_rbf_ovo(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    p: &RbfSvmParams,
) -> Result<RbfWeights> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension("rows and labels differ".into()));
    }
    let mut class_rows: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        class_rows[c].push(i);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| !class_rows[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::Training("one-vs-one needs at least 2 classes".into()));
    }
    let mut pair_defs = Vec::new();
    for (ai, &a) in present.iter().enumerate() {
        for &b in &present[ai + 1..] {
            pair_defs.push((a, b));
        }
    }

    let solutions = par_map(pair_defs.len(), |pi| {
        let (a, b) = pair_defs[pi];
        let idx: Vec<usize> = class_rows[a]
            .iter()
            .chain(class_rows[b].iter())
            .copied()
            .collect();
        let sub = x.select(ndarray::Axis(0), &idx);
        let targets: Vec<f64> = idx
            .iter()
            .map(|&i| if y[i] == a { 1.0 } else { -1.0 })
            .collect();
        train_binary_rbf(&sub, &targets, p.c, p.gamma, SMO_TOL).map(|sol| (idx, targets, sol))
    });

    let mut shared: Vec<Vec<f64>> = Vec::new();
    let mut shared_index: HashMap<usize, u32> = HashMap::new();
    let mut pairs = Vec::with_capacity(pair_defs.len());
    for (pi, result) in solutions.into_iter().enumerate() {
        let (idx, targets, sol) = result?;
        let (a, b) = pair_defs[pi];
        let mut sv_idx = Vec::new();
        let mut coef = Vec::new();
        for (local, &global) in idx.iter().enumerate() {
            if sol.alpha[local] > ALPHA_EPS {
                let slot = *shared_index.entry(global).or_insert_with(|| {
                    shared.push(x.row(global).to_vec());
                    (shared.len() - 1) as u32
                });
                sv_idx.push(slot);
                coef.push(sol.alpha[local] * targets[local]);
            }
        }
        pairs.push(PairClassifier {
            class_a: a,
            class_b: b,
            sv_idx,
            coef,
            bias: sol.bias,
        });
    }
    Ok(RbfWeights {
        gamma: p.gamma,
        support_vectors: shared,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn decision(x: &Array2<f64>, targets: &[f64], sol: &BinarySvmSolution, gamma: f64, q: &[f64]) -> f64 {
        let mut f = sol.bias;
        for s in 0..x.nrows() {
            if sol.alpha[s] > 0.0 {
                f += sol.alpha[s] * targets[s] * rbf_kernel(x.row(s).to_slice().unwrap(), q, gamma);
            }
        }
        f
    }

    #[test]
    fn xor_is_fit_perfectly() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let targets = vec![1.0, 1.0, -1.0, -1.0];
        let sol = train_binary_rbf(&x, &targets, 10.0, 1.0, 1e-4).unwrap();
        assert!(sol.converged);
        for i in 0..4 {
            let f = decision(&x, &targets, &sol, 1.0, x.row(i).to_slice().unwrap());
            assert!(
                f * targets[i] > 0.0,
                "point {i}: decision {f} vs target {}",
                targets[i]
            );
        }
        assert!(kkt_violation(&x, &targets, &sol, 10.0, 1.0) <= 1e-3);
    }

    /// Independent oracle for the XOR dual: by the problem's symmetry the
    /// optimum has all four multipliers equal, so a dense 1-D scan over that
    /// ray plus a full 4-D KKT check certifies the optimum to 1e-3.
    #[test]
    fn xor_dual_matches_dense_grid_oracle() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let targets = [1.0, 1.0, -1.0, -1.0];
        let c = 10.0;
        let gamma = 1.0;
        let rows: Vec<&[f64]> = (0..4).map(|i| x.row(i).to_slice().unwrap()).collect();
        let q = |i: usize, j: usize| targets[i] * targets[j] * rbf_kernel(rows[i], rows[j], gamma);

        let objective = |a: &[f64; 4]| -> f64 {
            let mut obj = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    obj += 0.5 * a[i] * a[j] * q(i, j);
                }
                obj -= a[i];
            }
            obj
        };

        // Dense grid over the symmetric ray alpha_i = t (equality constraint
        // holds automatically: two +1s and two -1s).
        let mut best_t = 0.0;
        let mut best_obj = f64::INFINITY;
        let mut t = 0.0;
        while t <= c {
            let obj = objective(&[t, t, t, t]);
            if obj < best_obj {
                best_obj = obj;
                best_t = t;
            }
            t += 1e-3;
        }
        // Certify stationarity of the oracle point in the full 4-D problem:
        // the projected gradient along every feasible pair direction is ~0.
        let a = [best_t; 4];
        let grad: Vec<f64> = (0..4)
            .map(|i| (0..4).map(|j| q(i, j) * a[j]).sum::<f64>() - 1.0)
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                // Feasible interior point: gradient condition is
                // -y_i g_i == -y_j g_j for all pairs.
                let vi = -targets[i] * grad[i];
                let vj = -targets[j] * grad[j];
                assert!(
                    (vi - vj).abs() < 1e-2,
                    "oracle point not stationary: {vi} vs {vj}"
                );
            }
        }

        let sol = train_binary_rbf(&x, &targets.to_vec(), c, gamma, 1e-5).unwrap();
        let smo_obj = objective(&[sol.alpha[0], sol.alpha[1], sol.alpha[2], sol.alpha[3]]);
        assert!(
            (smo_obj - best_obj).abs() <= 1e-3,
            "SMO objective {smo_obj} vs oracle {best_obj}"
        );
    }

    #[test]
    fn kkt_holds_on_random_blobs() {
        let mut rng = crate::seed::stream_rng(4, &[91]);
        for trial in 0..5 {
            let n = 60;
            let x = Array2::from_shape_fn((n, 3), |(i, _)| {
                let center = if i < n / 2 { 0.0 } else { 2.0 };
                center + rng.gen_range(-0.8..0.8)
            });
            let targets: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
            let sol = train_binary_rbf(&x, &targets, 5.0, 0.7, SMO_TOL).unwrap();
            let viol = kkt_violation(&x, &targets, &sol, 5.0, 0.7);
            assert!(
                viol <= 1e-3,
                "trial {trial}: KKT violation {viol} exceeds 1e-3"
            );
            assert!(sol.alpha.iter().all(|&a| (-1e-8..=5.0 + 1e-8).contains(&a)));
        }
    }

    #[test]
    fn ovo_scores_never_index_out_of_range() {
        let mut rng = crate::seed::stream_rng(8, &[92]);
        let n = 48;
        let x = Array2::from_shape_fn((n, 2), |(i, _)| (i / 12) as f64 * 1.5 + rng.gen_range(-0.3..0.3));
        let y: Vec<usize> = (0..n).map(|i| i / 12).collect();
        let p = RbfSvmParams { c: 10.0, gamma: 0.8 };
        let w = train_rbf_ovo(&x, &y, 4, &p).unwrap();
        assert_eq!(w.pairs.len(), 6);
        for pair in &w.pairs {
            assert!(pair.class_a < 4 && pair.class_b < 4);
            for idx in &pair.sv_idx {
                assert!((*idx as usize) < w.support_vectors.len());
            }
        }
    }

    #[test]
    fn ovo_training_is_deterministic() {
        let mut rng = crate::seed::stream_rng(6, &[93]);
        let x = Array2::from_shape_fn((30, 2), |_| rng.gen_range(0.0..1.0));
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let p = RbfSvmParams { c: 2.0, gamma: 1.5 };
        let a = train_rbf_ovo(&x, &y, 3, &p).unwrap();
        let b = train_rbf_ovo(&x, &y, 3, &p).unwrap();
        assert_eq!(a.support_vectors, b.support_vectors);
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(pa.sv_idx, pb.sv_idx);
            assert_eq!(pa.coef, pb.coef);
            assert_eq!(pa.bias.to_bits(), pb.bias.to_bits());
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            train_binary_rbf(&x, &[1.0, 1.0], 1.0, 1.0, 1e-3),
            Err(Error::Training(_))
        ));
    }
}
