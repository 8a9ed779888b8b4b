//! Non-negative matrix factorization for spectral dimensionality reduction.
//!
//! Minimizes the Frobenius objective `||V - WH||_F` with `W, H >= 0` via
//! multiplicative updates. The learned basis `H` maps full-resolution
//! reflectance curves to k-dimensional coefficient vectors; new samples are
//! projected with the same update restricted to the coefficients.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{par_map, par_matmul};
use crate::seed::stream_rng;
use crate::spectra::WavelengthGrid;

pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_TRANSFORM_MAX_ITER: usize = 300;
pub const DEFAULT_TRANSFORM_TOL: f64 = 1e-10;
/// Added inside update denominators to avoid division by zero.
const DELTA: f64 = 1e-12;
const SCHEMA_VERSION: u32 = 1;

/// N preprocessed reflectance rows plus their labels and episode ids.
#[derive(Debug, Clone)]
pub struct SpectraMatrix {
    pub rows: Array2<f64>,
    pub labels: Vec<String>,
    pub episode_ids: Vec<u32>,
    /// Fingerprint of the wavelength grid the columns correspond to.
    pub grid_hash: u64,
}

impl SpectraMatrix {
    pub fn new(
        rows: Array2<f64>,
        labels: Vec<String>,
        episode_ids: Vec<u32>,
        grid_hash: u64,
    ) -> Result<Self> {
        let n = rows.nrows();
        if labels.len() != n || episode_ids.len() != n {
            return Err(Error::Dimension(format!(
                "matrix has {n} rows but {} labels and {} episode ids",
                labels.len(),
                episode_ids.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(
                "spectra matrix entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            rows,
            labels,
            episode_ids,
            grid_hash,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.rows.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.rows.ncols()
    }

    /// The subset of rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.num_samples() {
                return Err(Error::Dimension(format!("row {i} out of range")));
            }
        }
        Ok(Self {
            rows: self.rows.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            episode_ids: indices.iter().map(|&i| self.episode_ids[i]).collect(),
            grid_hash: self.grid_hash,
        })
    }

    /// Restrict to a subset of channel columns (e.g. the visible band).
    pub fn select_channels(&self, channels: &[usize], grid_hash: u64) -> Result<Self> {
        for &c in channels {
            if c >= self.num_channels() {
                return Err(Error::Dimension(format!("channel {c} out of range")));
            }
        }
        let rows = self.rows.select(Axis(1), channels);
        Ok(Self {
            rows,
            labels: self.labels.clone(),
            episode_ids: self.episode_ids.clone(),
            grid_hash,
        })
    }
}

/// Learned nonnegative basis plus fit metadata.
#[derive(Debug, Clone)]
pub struct NmfModel {
    h: Array2<f64>,
    /// Cached `H H^T`, reused by every transform call.
    hht: Array2<f64>,
    pub k: usize,
    pub fit_error: f64,
    pub iterations_run: usize,
    pub seed: u64,
    pub grid_hash: u64,
    /// Basis rows that collapsed to zero and stayed dead after one repair.
    pub dead_rows: Vec<usize>,
}

impl NmfModel {
    /// Build a model around an externally supplied basis (all entries must
    /// be finite and nonnegative).
    pub fn new(h: Array2<f64>, seed: u64, grid_hash: u64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::Parameter("basis must be nonempty".into()));
        }
        if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("basis entries must be finite and nonnegative".into()));
        }
        Ok(Self::from_parts(h, 0.0, 0, seed, grid_hash, Vec::new()))
    }

    fn from_parts(
        h: Array2<f64>,
        fit_error: f64,
        iterations_run: usize,
        seed: u64,
        grid_hash: u64,
        dead_rows: Vec<usize>,
    ) -> Self {
        let hht = h.dot(&h.t());
        let k = h.nrows();
        Self {
            h,
            hht,
            k,
            fit_error,
            iterations_run,
            seed,
            grid_hash,
            dead_rows,
        }
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.h
    }

    pub fn num_channels(&self) -> usize {
        self.h.ncols()
    }

    pub fn verify_grid(&self, grid: &WavelengthGrid) -> Result<()> {
        let actual = grid.content_hash();
        if actual != self.grid_hash {
            return Err(Error::Compatibility(format!(
                "model was fit on grid hash {:016x}, dataset grid hash is {actual:016x}",
                self.grid_hash
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = NmfModelFile {
            schema_version: SCHEMA_VERSION,
            k: self.k,
            seed: self.seed,
            fit_error: self.fit_error,
            iterations_run: self.iterations_run,
            grid_hash: self.grid_hash,
            h: self.h.outer_iter().map(|r| r.to_vec()).collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Parameter(format!("serialize NMF model: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: NmfModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Compatibility(format!(
                "NMF model schema {} unsupported (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let k = file.k;
        if file.h.len() != k || k == 0 {
            return Err(Error::Compatibility(format!(
                "model declares k={k} but H has {} rows",
                file.h.len()
            )));
        }
        let c = file.h[0].len();
        if file.h.iter().any(|r| r.len() != c) {
            return Err(Error::Compatibility("ragged H matrix".into()));
        }
        let mut h = Array2::zeros((k, c));
        for (i, row) in file.h.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Domain(format!("H[{i},{j}] = {v} is invalid")));
                }
                h[[i, j]] = v;
            }
        }
        Ok(Self::from_parts(
            h,
            file.fit_error,
            file.iterations_run,
            file.seed,
            file.grid_hash,
            Vec::new(),
        ))
    }

    /// Load and reject the model if it was fit on a different grid.
    pub fn load_for_grid(path: &Path, grid: &WavelengthGrid) -> Result<Self> {
        let model = Self::load(path)?;
        model.verify_grid(grid)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct NmfModelFile {
    schema_version: u32,
    k: usize,
    seed: u64,
    fit_error: f64,
    iterations_run: usize,
    grid_hash: u64,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
}

/// Result of a fit: per-row coefficients, the model, and the Frobenius
/// objective recorded before iteration 1 and after every iteration.
#[derive(Debug, Clone)]
pub struct NmfFit {
    pub coefficients: Array2<f64>,
    pub model: NmfModel,
    pub objective_history: Vec<f64>,
}

/// `||V - WH||_F` over fixed row blocks (schedule independent).
fn frobenius_residual(v: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    const BLOCK: usize = 256;
    let blocks: Vec<(usize, usize)> = (0..v.nrows())
        .step_by(BLOCK)
        .map(|s| (s, (s + BLOCK).min(v.nrows())))
        .collect();
    let partials = par_map(blocks.len(), |bi| {
        let (s, e) = blocks[bi];
        let vb = v.slice(ndarray::s![s..e, ..]);
        let wb = w.slice(ndarray::s![s..e, ..]);
        let recon = wb.dot(h);
        let mut acc = 0.0;
        Zip::from(&vb).and(&recon).for_each(|&a, &b| {
            let d = a - b;
            acc += d * d;
        });
        acc
    });
    partials.iter().sum::<f64>().sqrt()
}

/// Fit `V ~ WH` with `k` components by multiplicative updates.
///
/// Deterministic for a fixed seed: initialization is drawn from a ChaCha
/// stream and the parallel schedule cannot affect results. The objective is
/// non-increasing across iterations; fitting stops when the relative
/// decrease drops below `tol` or after `max_iter` iterations.
pub fn nmf_fit(
    v: &SpectraMatrix,
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<NmfFit> {
    let n = v.num_samples();
    let c = v.num_channels();
    if k == 0 || k > n.min(c) {
        return Err(Error::Parameter(format!(
            "k={k} out of range 1..={}",
            n.min(c)
        )));
    }
    let vm = &v.rows;
    let mean = vm.sum() / (n * c) as f64;
    // Strictly positive start avoids the absorbing-zero pathology of
    // multiplicative updates.
    let scale = (mean.max(DELTA) / k as f64).sqrt();
    let mut rng = stream_rng(seed, &[0x6e6d66]);
    let mut w = Array2::from_shape_fn((n, k), |_| rng.gen_range(0.1..1.1) * scale);
    let mut h = Array2::from_shape_fn((k, c), |_| rng.gen_range(0.1..1.1) * scale);

    let mut history = Vec::with_capacity(max_iter + 1);
    let mut obj_prev = frobenius_residual(vm, &w, &h);
    history.push(obj_prev);

    let mut repaired = vec![false; k];
    let mut dead_rows = Vec::new();
    let mut iterations_run = 0;

    for iter in 1..=max_iter {
        // W <- W * (V H^T) / (W (H H^T) + delta)
        let vht = par_matmul(vm.view(), h.t());
        let hht = h.dot(&h.t());
        let whht = w.dot(&hht);
        Zip::from(&mut w).and(&vht).and(&whht).for_each(|wi, &num, &den| {
            *wi *= num / (den + DELTA);
        });

        // H <- H * (W^T V) / ((W^T W) H + delta)
        let wtv_t = par_matmul(vm.t(), w.view()); // C x k
        let wtw = w.t().dot(&w);
        let wtwh = wtw.dot(&h);
        Zip::from(&mut h)
            .and(wtv_t.t())
            .and(&wtwh)
            .for_each(|hi, &num, &den| {
                *hi *= num / (den + DELTA);
            });

        // Dead-basis repair: a fully zeroed row is re-randomized once; if it
        // dies again it stays dead and is reported in the fit metadata.
        for r in 0..k {
            let dead = h.row(r).iter().all(|x| *x == 0.0);
            if dead {
                if repaired[r] {
                    if !dead_rows.contains(&r) {
                        dead_rows.push(r);
                    }
                } else {
                    repaired[r] = true;
                    for x in h.row_mut(r) {
                        *x = rng.gen_range(0.1..1.1) * scale;
                    }
                }
            }
        }

        let obj = frobenius_residual(vm, &w, &h);
        history.push(obj);
        iterations_run = iter;
        let rel = (obj_prev - obj) / obj_prev.max(DELTA);
        obj_prev = obj;
        if rel < tol {
            break;
        }
    }

    let model = NmfModel::from_parts(
        h,
        obj_prev,
        iterations_run,
        seed,
        v.grid_hash,
        dead_rows,
    );
    Ok(NmfFit {
        coefficients: w,
        model,
        objective_history: history,
    })
}

/// Project one reflectance vector onto the learned basis: multiplicative
/// updates on `w` only, starting from the uniform vector `1/k`.
pub fn nmf_transform(
    values: &[f64],
    model: &NmfModel,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let c = model.num_channels();
    if values.len() != c {
        return Err(Error::Dimension(format!(
            "vector has {} channels, model expects {c}",
            values.len()
        )));
    }
    if values.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Domain(
            "transform input must be finite and nonnegative".into(),
        ));
    }
    let k = model.k;
    let v = ArrayView1::from(values);
    let vht: Array1<f64> = model.h.dot(&v); // length k, = (v H^T)
    let v_norm2: f64 = values.iter().map(|x| x * x).sum();

    let mut w = Array1::from_elem(k, 1.0 / k as f64);
    // ||v - wH||^2 = ||v||^2 - 2 w.(vH^T) + w^T (HH^T) w
    let residual2 = |w: &Array1<f64>| -> f64 {
        let quad = w.dot(&model.hht.dot(w));
        (v_norm2 - 2.0 * w.dot(&vht) + quad).max(0.0)
    };
    let mut prev = residual2(&w);
    for _ in 0..max_iter {
        let den = model.hht.dot(&w);
        Zip::from(&mut w).and(&vht).and(&den).for_each(|wi, &num, &d| {
            *wi *= num / (d + DELTA);
        });
        let cur = residual2(&w);
        let rel = (prev - cur) / prev.max(DELTA);
        prev = cur;
        if rel.abs() < tol {
            break;
        }
    }
    Ok(w.to_vec())
}

/// `||V - WH||_F` for externally supplied factors.
pub fn reconstruction_error(
    v: &SpectraMatrix,
    w: &Array2<f64>,
    model: &NmfModel,
) -> Result<f64> {
    if w.nrows() != v.num_samples() || w.ncols() != model.k {
        return Err(Error::Dimension(format!(
            "W is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            v.num_samples(),
            model.k
        )));
    }
    if model.num_channels() != v.num_channels() {
        return Err(Error::Dimension(format!(
            "model basis has {} channels, matrix has {}",
            model.num_channels(),
            v.num_channels()
        )));
    }
    Ok(frobenius_residual(&v.rows, w, &model.h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(rows: Array2<f64>) -> SpectraMatrix {
        let n = rows.nrows();
        SpectraMatrix::new(rows, vec!["x".into(); n], vec![0; n], 0xfeed).unwrap()
    }

    fn random_nonneg(n: usize, c: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, &[99]);
        Array2::from_shape_fn((n, c), |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn rank_one_is_recovered_exactly() {
        let mut rng = stream_rng(5, &[1]);
        let wv: Vec<f64> = (0..20).map(|_| rng.gen_range(0.1..2.0)).collect();
        let hv: Vec<f64> = (0..15).map(|_| rng.gen_range(0.1..2.0)).collect();
        let v = Array2::from_shape_fn((20, 15), |(i, j)| wv[i] * hv[j]);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let fit = nmf_fit(&matrix(v), 1, 2000, 0.0, 42).unwrap();
        assert!(
            fit.model.fit_error < 1e-8 * norm,
            "fit error {} vs bound {}",
            fit.model.fit_error,
            1e-8 * norm
        );
    }

    #[test]
    fn block_diagonal_attains_tiny_error() {
        // k disjoint nonnegative blocks admit an exact rank-k factorization;
        // the oracle is the best of 20 random restarts.
        let k = 3;
        let mut v = Array2::zeros((12, 15));
        let mut rng = stream_rng(17, &[2]);
        for b in 0..k {
            for i in 0..4 {
                for j in 0..5 {
                    v[[b * 4 + i, b * 5 + j]] = rng.gen_range(0.5..1.5);
                }
            }
        }
        // Rank of each random block is generically > 1, so project each block
        // to rank 1 by replacing it with an outer product.
        let mut v1 = Array2::zeros((12, 15));
        for b in 0..k {
            let col: Vec<f64> = (0..4).map(|i| v[[b * 4 + i, b * 5]]).collect();
            let row: Vec<f64> = (0..5).map(|j| v[[b * 4, b * 5 + j]]).collect();
            for i in 0..4 {
                for j in 0..5 {
                    v1[[b * 4 + i, b * 5 + j]] = col[i] * row[j] / row[0];
                }
            }
        }
        let norm = v1.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sm = matrix(v1);
        let best = (0..20)
            .map(|s| nmf_fit(&sm, k, 3000, 0.0, s).unwrap().model.fit_error)
            .fold(f64::INFINITY, f64::min);
        assert!(
            best < 1e-6 * norm,
            "best restart error {best} vs bound {}",
            1e-6 * norm
        );
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..10u64 {
            let v = matrix(random_nonneg(50, 80, seed));
            let fit = nmf_fit(&v, 10, 200, 0.0, seed).unwrap();
            for (i, pair) in fit.objective_history.windows(2).enumerate() {
                assert!(
                    pair[1] <= pair[0] * (1.0 + 1e-12),
                    "seed {seed} iteration {i}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn factors_stay_nonnegative_and_basis_rows_alive() {
        let v = matrix(random_nonneg(30, 40, 3));
        let fit = nmf_fit(&v, 5, 300, 1e-7, 11).unwrap();
        assert!(fit.coefficients.iter().all(|x| *x >= 0.0));
        assert!(fit.model.basis().iter().all(|x| *x >= 0.0));
        for r in 0..fit.model.k {
            assert!(
                fit.model.basis().row(r).iter().any(|x| *x > 0.0),
                "basis row {r} is all zero"
            );
        }
        assert!(fit.model.dead_rows.is_empty());
    }

    #[test]
    fn identical_seed_gives_bit_identical_factors() {
        let v = matrix(random_nonneg(25, 30, 8));
        let a = nmf_fit(&v, 4, 100, 1e-6, 123).unwrap();
        let b = nmf_fit(&v, 4, 100, 1e-6, 123).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        assert_eq!(a.model.basis(), b.model.basis());
        assert_eq!(a.model.fit_error.to_bits(), b.model.fit_error.to_bits());

        let c = nmf_fit(&v, 4, 100, 1e-6, 124).unwrap();
        assert_ne!(a.model.basis(), c.model.basis());
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let v = matrix(random_nonneg(5, 8, 1));
        assert!(matches!(nmf_fit(&v, 0, 10, 1e-5, 0), Err(Error::Parameter(_))));
        assert!(matches!(nmf_fit(&v, 6, 10, 1e-5, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn negative_entries_are_rejected_at_construction() {
        let rows = array![[1.0, -0.5], [0.0, 1.0]];
        assert!(matches!(
            SpectraMatrix::new(rows, vec!["a".into(); 2], vec![0, 1], 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn transform_zero_vector_gives_zero() {
        let v = matrix(random_nonneg(20, 12, 4));
        let fit = nmf_fit(&v, 3, 200, 1e-7, 9).unwrap();
        let w = nmf_transform(&vec![0.0; 12], &fit.model, 100, 1e-12).unwrap();
        assert!(w.iter().all(|x| *x == 0.0), "w = {w:?}");
    }

    #[test]
    fn transform_recovers_disjoint_basis_row() {
        // Basis rows with disjoint supports make the projection separable.
        let mut h = Array2::zeros((3, 9));
        for r in 0..3 {
            for j in 0..3 {
                h[[r, r * 3 + j]] = 1.0 + (r + j) as f64 * 0.3;
            }
        }
        let model = NmfModel::from_parts(h.clone(), 0.0, 0, 0, 0, Vec::new());
        for target in 0..3 {
            let v: Vec<f64> = h.row(target).to_vec();
            let w = nmf_transform(&v, &model, 500, 1e-14).unwrap();
            for (j, wj) in w.iter().enumerate() {
                let expect = if j == target { 1.0 } else { 0.0 };
                assert!(
                    (wj - expect).abs() < 1e-6,
                    "target {target}: w[{j}] = {wj}"
                );
            }
        }
    }

    /// Projected-gradient NNLS solved to high precision; independent of the
    /// multiplicative-update path it checks.
    fn nnls_oracle(v: &[f64], h: &Array2<f64>) -> Vec<f64> {
        let k = h.nrows();
        let hht = h.dot(&h.t());
        let vht = h.dot(&ArrayView1::from(v));
        let lipschitz = 2.0 * hht.iter().map(|x| x.abs()).sum::<f64>().max(DELTA);
        let step = 1.0 / lipschitz;
        let mut w = Array1::from_elem(k, 0.5);
        for _ in 0..20000 {
            let grad = 2.0 * (hht.dot(&w) - &vht);
            let mut moved = 0.0;
            for i in 0..k {
                let nw = (w[i] - step * grad[i]).max(0.0);
                moved += (nw - w[i]).abs();
                w[i] = nw;
            }
            if moved < 1e-14 {
                break;
            }
        }
        w.to_vec()
    }

    fn residual_norm(v: &[f64], w: &[f64], h: &Array2<f64>) -> f64 {
        let recon = ArrayView1::from(w).dot(h);
        v.iter()
            .zip(recon.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn transform_residual_close_to_nnls_oracle() {
        let v = matrix(random_nonneg(40, 25, 6));
        let fit = nmf_fit(&v, 6, 400, 1e-8, 21).unwrap();
        for row in 0..10 {
            let sample: Vec<f64> = v.rows.row(row).to_vec();
            let w_mu = nmf_transform(&sample, &fit.model, 600, 1e-13).unwrap();
            let w_star = nnls_oracle(&sample, fit.model.basis());
            let res_mu = residual_norm(&sample, &w_mu, fit.model.basis());
            let res_star = residual_norm(&sample, &w_star, fit.model.basis());
            assert!(
                res_mu <= 1.5 * res_star,
                "row {row}: MU residual {res_mu} vs oracle {res_star}"
            );
            // And no worse than 1.5x the residual this row had during training.
            let train_res = residual_norm(
                &sample,
                &fit.coefficients.row(row).to_vec(),
                fit.model.basis(),
            );
            assert!(res_mu <= 1.5 * train_res + 1e-12);
        }
    }

    #[test]
    fn reconstruction_error_matches_naive_loops() {
        let v = matrix(random_nonneg(9, 7, 2));
        let fit = nmf_fit(&v, 3, 50, 1e-6, 33).unwrap();
        let w = &fit.coefficients;
        let h = fit.model.basis();
        let mut acc = 0.0;
        for i in 0..9 {
            for j in 0..7 {
                let mut recon = 0.0;
                for l in 0..3 {
                    recon += w[[i, l]] * h[[l, j]];
                }
                let d = v.rows[[i, j]] - recon;
                acc += d * d;
            }
        }
        let naive = acc.sqrt();
        let fast = reconstruction_error(&v, w, &fit.model).unwrap();
        assert!((naive - fast).abs() < 1e-10);

        let zeros = Array2::zeros((9, 3));
        let vnorm = v.rows.iter().map(|x| x * x).sum::<f64>().sqrt();
        let at_zero = reconstruction_error(&v, &zeros, &fit.model).unwrap();
        assert!((at_zero - vnorm).abs() < 1e-10);

        let bad = Array2::zeros((9, 4));
        assert!(matches!(
            reconstruction_error(&v, &bad, &fit.model),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn exact_factorization_has_zero_error() {
        let w = array![[1.0, 0.5], [0.2, 2.0], [0.7, 0.1]];
        let h = array![[0.3, 1.0, 0.0, 0.4], [0.9, 0.2, 1.1, 0.0]];
        let v = matrix(w.dot(&h));
        let model = NmfModel::from_parts(h, 0.0, 0, 0, 0xfeed, Vec::new());
        let err = reconstruction_error(&v, &w, &model).unwrap();
        assert!(err < 1e-8);
    }

    #[test]
    fn json_round_trip_and_grid_rejection() {
        use tempfile::tempdir;
        let v = matrix(random_nonneg(15, 10, 7));
        let fit = nmf_fit(&v, 3, 80, 1e-6, 77).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("nmf.json");
        fit.model.save(&path).unwrap();
        let loaded = NmfModel::load(&path).unwrap();
        assert_eq!(loaded.basis(), fit.model.basis());
        assert_eq!(loaded.k, fit.model.k);
        assert_eq!(loaded.seed, 77);
        assert_eq!(loaded.grid_hash, 0xfeed);

        let grid = WavelengthGrid::new(vec![350.0, 400.0, 450.0]).unwrap();
        assert!(matches!(
            NmfModel::load_for_grid(&path, &grid),
            Err(Error::Compatibility(_))
        ));
    }

    #[test]
    fn json_bytes_are_deterministic() {
        use tempfile::tempdir;
        let v = matrix(random_nonneg(15, 10, 7));
        let dir = tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
        nmf_fit(&v, 3, 80, 1e-6, 50).unwrap().model.save(&p1).unwrap();
        nmf_fit(&v, 3, 80, 1e-6, 50).unwrap().model.save(&p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn k_of_ten_compresses_by_at_least_99_5_percent() {
        let ratio = 1.0 - 10.0 / 2048.0;
        assert!(ratio >= 0.995);
    }
}
