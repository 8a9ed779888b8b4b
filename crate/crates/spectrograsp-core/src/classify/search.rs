//! Grid search with episode-grouped stratified cross-validation.
//!
//! Cells and folds train independently (in parallel, each with a seed
//! derived from the master seed and its coordinates) and the winner is the
//! lattice point with the highest mean validation accuracy. Ties resolve
//! toward stronger regularization, then lexicographic parameter order —
//! implemented by evaluating cells in that canonical order and replacing
//! the incumbent only on a strictly better mean.

use serde::Serialize;

use super::split::{frames_in_episodes, stratified_folds};
use super::{train, HyperParams, LabeledVectors, TrainConfig};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
pub struct GridSearchConfig {
    pub folds: usize,
    pub seed: u64,
}

/// One lattice point's cross-validation record.
#[derive(Debug, Clone, Serialize)]
pub struct CvCell {
    pub params: HyperParams,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvOutcome {
    pub best: HyperParams,
    pub best_mean_accuracy: f64,
    pub cells: Vec<CvCell>,
}

fn canonical_order(grid: &[HyperParams]) -> Vec<HyperParams> {
    let mut sorted: Vec<HyperParams> = grid.to_vec();
    sorted.sort_by(|a, b| {
        let (ka, kb) = (a.tie_break_key(), b.tie_break_key());
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted
}

pub fn grid_search_cv(
    data: &LabeledVectors,
    grid: &[HyperParams],
    cfg: &GridSearchConfig,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    let family = grid[0].family();
    for p in grid {
        p.validate()?;
        if p.family() != family {
            return Err(Error::Parameter(
                "grid mixes hyperparameters from different families".into(),
            ));
        }
    }
    let folds = stratified_folds(data, cfg.folds, cfg.seed)?;
    let grid = canonical_order(grid);

    // Precompute per-fold train/validation frame indices once.
    let fold_frames: Vec<(Vec<usize>, Vec<usize>)> = folds
        .iter()
        .map(|val_episodes| {
            let val = frames_in_episodes(data, val_episodes);
            let val_set: std::collections::HashSet<usize> = val.iter().copied().collect();
            let train: Vec<usize> = (0..data.num_samples())
                .filter(|i| !val_set.contains(i))
                .collect();
            (train, val)
        })
        .collect();

    let n_cells = grid.len();
    let n_folds = fold_frames.len();
    let accuracies = par_map(n_cells * n_folds, |unit| -> Result<f64> {
        let (ci, fi) = (unit / n_folds, unit % n_folds);
        let (train_idx, val_idx) = &fold_frames[fi];
        if val_idx.is_empty() {
            return Ok(f64::NAN);
        }
        let train_set = data.subset(train_idx);
        let val_set = data.subset(val_idx);
        // Temperature calibration cannot change the argmax, so CV cells
        // skip it for speed.
        let cell_cfg = TrainConfig::new(
            grid[ci].clone(),
            derive_seed(cfg.seed, &[0x6376, ci as u64, fi as u64]),
        )
        .without_calibration();
        let model = train(&train_set, &cell_cfg)?;
        let mut correct = 0usize;
        for r in 0..val_set.num_samples() {
            let pred = model.predict(val_set.x.row(r).as_slice().unwrap())?;
            correct += usize::from(pred == val_set.y[r]);
        }
        Ok(correct as f64 / val_set.num_samples() as f64)
    });

    let mut cells = Vec::with_capacity(n_cells);
    for (ci, point) in grid.iter().enumerate() {
        let mut fold_accuracies = Vec::with_capacity(n_folds);
        for fi in 0..n_folds {
            fold_accuracies.push(match &accuracies[ci * n_folds + fi] {
                Ok(a) => *a,
                Err(e) => {
                    return Err(Error::Training(format!(
                        "cell {} fold {fi}: {e}",
                        describe(point)
                    )))
                }
            });
        }
        let usable: Vec<f64> = fold_accuracies.iter().copied().filter(|a| !a.is_nan()).collect();
        let mean_accuracy = usable.iter().sum::<f64>() / usable.len().max(1) as f64;
        cells.push(CvCell {
            params: point.clone(),
            fold_accuracies,
            mean_accuracy,
        });
    }

    let mut best_idx = 0;
    for (i, cell) in cells.iter().enumerate() {
        if cell.mean_accuracy > cells[best_idx].mean_accuracy {
            best_idx = i;
        }
    }
    Ok(CvOutcome {
        best: cells[best_idx].params.clone(),
        best_mean_accuracy: cells[best_idx].mean_accuracy,
        cells,
    })
}

/// Short human-readable form for tables and logs.
pub fn describe(p: &HyperParams) -> String {
    match p {
        HyperParams::Logistic(p) => format!(
            "logistic(l2={},lr={},epochs={},batch={})",
            p.l2, p.learning_rate, p.epochs, p.batch_size
        ),
        HyperParams::LinearSvm(p) => format!("linear-svm(C={})", p.c),
        HyperParams::RbfSvm(p) => format!("rbf-svm(C={},gamma={})", p.c, p.gamma),
        HyperParams::Mlp(p) => format!(
            "mlp(hidden={:?},lr={},epochs={},batch={},l2={})",
            p.hidden, p.learning_rate, p.epochs, p.batch_size, p.l2
        ),
    }
}
