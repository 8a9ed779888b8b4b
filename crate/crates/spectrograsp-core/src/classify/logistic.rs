//! One-vs-rest logistic regression trained by seeded mini-batch gradient
//! descent. Per-class scores are the raw linear responses `w.x + b`.

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{LinearWeights, LogisticParams};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::seed::stream_rng;

/// Binary logistic loss and gradient on a batch.
///
/// `targets` are +/-1. The loss is
/// `mean(log(1 + exp(-t (w.x + b)))) + l2/2 ||w||^2`; the bias is not
/// regularized. Returns `(loss, grad_w, grad_b)`.
pub(crate) fn loss_grad(
    x: &Array2<f64>,
    targets: &[f64],
    w: &[f64],
    b: f64,
    l2: f64,
    rows: &[usize],
) -> (f64, Vec<f64>, f64) {
    let k = w.len();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; k];
    let mut grad_b = 0.0;
    let m = rows.len() as f64;
    for &i in rows {
        let xi = x.row(i);
        let t = targets[i];
        let z = t * (xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b);
        // log(1 + exp(-z)) computed stably on both tails.
        loss += if z > 0.0 {
            (-z).exp().ln_1p()
        } else {
            -z + z.exp().ln_1p()
        };
        let sig = 1.0 / (1.0 + z.exp()); // sigmoid(-z)
        let coef = -t * sig;
        for (g, a) in grad_w.iter_mut().zip(xi.iter()) {
            *g += coef * a;
        }
        grad_b += coef;
    }
    loss /= m;
    grad_b /= m;
    let mut reg = 0.0;
    for (g, wi) in grad_w.iter_mut().zip(w) {
        *g = *g / m + l2 * wi;
        reg += wi * wi;
    }
    loss += 0.5 * l2 * reg;
    (loss, grad_w, grad_b)
}

fn train_one_class(
    x: &Array2<f64>,
    y: &[usize],
    class: usize,
    p: &LogisticParams,
    seed: u64,
) -> (Vec<f64>, f64) {
    let n = x.nrows();
    let k = x.ncols();
    let targets: Vec<f64> = y.iter().map(|&c| if c == class { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0; k];
    let mut b = 0.0;
    let mut rng = stream_rng(seed, &[0x6c6f67, class as u64]);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = p.batch_size.min(n);
    for _ in 0..p.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let (_, gw, gb) = loss_grad(x, &targets, &w, b, p.l2, chunk);
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= p.learning_rate * g;
            }
            b -= p.learning_rate * gb;
        }
    }
    (w, b)
}

/// One binary classifier per class, trained independently (and in parallel;
/// each class owns a derived seed so scheduling cannot change results).
pub fn train_logistic(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    p: &LogisticParams,
    seed: u64,
) -> Result<LinearWeights> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension("rows and labels differ".into()));
    }
    let trained = par_map(n_classes, |c| train_one_class(x, y, c, p, seed));
    let mut weights = Vec::with_capacity(n_classes);
    let mut biases = Vec::with_capacity(n_classes);
    for (w, b) in trained {
        weights.push(w);
        biases.push(b);
    }
    Ok(LinearWeights { weights, biases })
}
