//! Multi-layer perceptron with a native softmax head and rectifier hidden
//! activations, trained by seeded mini-batch gradient descent.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{MlpLayer, MlpParams, MlpWeights};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

pub(crate) struct Net {
    pub ws: Vec<Array2<f64>>, // out x in
    pub bs: Vec<Array1<f64>>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn forward_batch(net: &Net, xb: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let depth = net.ws.len();
    let mut pre = Vec::with_capacity(depth);
    let mut act = Vec::with_capacity(depth + 1);
    act.push(xb.clone());
    for l in 0..depth {
        let z = act[l].dot(&net.ws[l].t()) + &net.bs[l];
        let a = if l + 1 < depth { z.mapv(relu) } else { z.clone() };
        pre.push(z);
        act.push(a);
    }
    (pre, act)
}

/// Softmax cross-entropy loss and exact gradients on a batch; weights (not
/// biases) carry L2 regularization. Exposed for the finite-difference check.
pub(crate) fn loss_and_grads(
    net: &Net,
    xb: &Array2<f64>,
    yb: &[usize],
    l2: f64,
) -> (f64, Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let b = xb.nrows() as f64;
    let depth = net.ws.len();
    let (pre, act) = forward_batch(net, xb);
    let logits = &pre[depth - 1];

    let mut loss = 0.0;
    let mut dz = logits.clone();
    for (i, mut row) in dz.axis_iter_mut(Axis(0)).enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        loss -= row[yb[i]] - max - sum.ln();
        for v in row.iter_mut() {
            *v = (*v - max).exp() / sum;
        }
        row[yb[i]] -= 1.0;
    }
    loss /= b;
    dz.mapv_inplace(|v| v / b);

    let mut grad_ws = vec![Array2::zeros((0, 0)); depth];
    let mut grad_bs = vec![Array1::zeros(0); depth];
    let mut delta = dz;
    for l in (0..depth).rev() {
        grad_ws[l] = delta.t().dot(&act[l]) + l2 * &net.ws[l];
        grad_bs[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&net.ws[l]);
            upstream
                .iter_mut()
                .zip(pre[l - 1].iter())
                .for_each(|(u, &z)| {
                    if z <= 0.0 {
                        *u = 0.0;
                    }
                });
            delta = upstream;
        }
    }
    for w in &net.ws {
        loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    }
    (loss, grad_ws, grad_bs)
}

pub(crate) fn init_net(dims: &[usize], seed: u64) -> Net {
    let mut rng = stream_rng(seed, &[0x6d6c70]);
    let mut ws = Vec::new();
    let mut bs = Vec::new();
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let s = (6.0 / fan_in as f64).sqrt();
        ws.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
            rng.gen_range(-s..s)
        }));
        bs.push(Array1::zeros(fan_out));
    }
    Net { ws, bs }
}

pub fn train_mlp(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    p: &MlpParams,
    seed: u64,
) -> Result<MlpWeights> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension("rows and labels differ".into()));
    }
    let n = x.nrows();
    let mut dims = vec![x.ncols()];
    dims.extend_from_slice(&p.hidden);
    dims.push(n_classes);
    let mut net = init_net(&dims, seed);

    let mut rng = stream_rng(seed, &[0x6d6c71]);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = p.batch_size.min(n);
    for _ in 0..p.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (_, gw, gb) = loss_and_grads(&net, &xb, &yb, p.l2);
            for l in 0..net.ws.len() {
                net.ws[l].scaled_add(-p.learning_rate, &gw[l]);
                net.bs[l].scaled_add(-p.learning_rate, &gb[l]);
            }
        }
    }

    let layers = net
        .ws
        .iter()
        .zip(&net.bs)
        .map(|(w, b)| MlpLayer {
            weights: w.outer_iter().map(|r| r.to_vec()).collect(),
            biases: b.to_vec(),
        })
        .collect();
    Ok(MlpWeights {
        layers,
        activation: "relu".into(),
    })
}

/// Forward pass for one sample; returns the logits.
pub(crate) fn forward_single(mw: &MlpWeights, x: &[f64]) -> Vec<f64> {
    let depth = mw.layers.len();
    let mut a: Vec<f64> = x.to_vec();
    for (l, layer) in mw.layers.iter().enumerate() {
        let mut z = layer.biases.clone();
        for (zu, wrow) in z.iter_mut().zip(&layer.weights) {
            *zu += wrow.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
        }
        if l + 1 < depth {
            for v in z.iter_mut() {
                *v = relu(*v);
            }
        }
        a = z;
    }
    a
}
