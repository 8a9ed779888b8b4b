//! `train`: episode-stratified split, NMF fit on the training split, grid
//! search cross-validation, final model training, and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;
use spectrograsp_core::classify::{
    default_gamma, grid_search_cv, train, train_test_split, CvOutcome, Family, GridSearchConfig,
    HyperParams, LinearSvmParams, LogisticParams, MlpParams, RbfSvmParams, TrainConfig,
};
use spectrograsp_core::dataset::Dataset;
use spectrograsp_core::error::{Error, Result};
use spectrograsp_core::nmf::{nmf_fit, NmfFit, SpectraMatrix};
use spectrograsp_core::pipeline::{encode_with_nmf, preprocess_dataset, PreprocessConfig};
use spectrograsp_core::seed::derive_seed;

use crate::config::{write_json, TrainRunConfig, SCHEMA_VERSION};
use crate::{csv_quote, SplitFile};

/// The standard hyperparameter lattice per family. The RBF kernel width grid
/// centers on the scale-adaptive default for the given features.
pub fn default_grid(family: Family, x: &Array2<f64>) -> Vec<HyperParams> {
    match family {
        Family::Logistic => [1e-4, 1e-3, 1e-2]
            .into_iter()
            .map(|l2| {
                HyperParams::Logistic(LogisticParams {
                    l2,
                    learning_rate: 0.3,
                    epochs: 150,
                    batch_size: 64,
                })
            })
            .collect(),
        Family::LinearSvm => [0.1, 1.0, 10.0]
            .into_iter()
            .map(|c| HyperParams::LinearSvm(LinearSvmParams { c }))
            .collect(),
        Family::RbfSvm => {
            let g0 = default_gamma(x);
            let mut grid = Vec::new();
            for c in [1.0, 10.0, 100.0] {
                for gamma in [0.25 * g0, g0, 4.0 * g0] {
                    grid.push(HyperParams::RbfSvm(RbfSvmParams { c, gamma }));
                }
            }
            grid
        }
        Family::Mlp => {
            let mut grid = Vec::new();
            for units in [32usize, 64, 128] {
                for layers in [1usize, 2] {
                    grid.push(HyperParams::Mlp(MlpParams {
                        hidden: vec![units; layers],
                        learning_rate: 0.1,
                        epochs: 120,
                        batch_size: 64,
                        l2: 1e-4,
                    }));
                }
            }
            grid
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub chosen_k: usize,
    pub best_params: HyperParams,
    pub cv_accuracy: f64,
    pub nmf_fit_error: f64,
    pub nmf_iterations: usize,
    pub calibration_temperature: f64,
}

struct SweepCell {
    k: usize,
    cv: CvOutcome,
    fit: NmfFit,
}

fn fit_and_search(
    sm_train: &SpectraMatrix,
    classes: &[String],
    k: usize,
    cfg: &TrainRunConfig,
) -> Result<SweepCell> {
    let fit = nmf_fit(
        sm_train,
        k,
        cfg.nmf_max_iter,
        cfg.nmf_tol,
        derive_seed(cfg.seed, &[0x6e6d66, k as u64]),
    )?;
    let encoded = encode_with_nmf(sm_train, &fit.model, classes)?;
    let family = Family::parse(&cfg.family)?;
    let grid = default_grid(family, &encoded.x);
    let cv = grid_search_cv(
        &encoded,
        &grid,
        &GridSearchConfig {
            folds: cfg.folds,
            seed: derive_seed(cfg.seed, &[0x677269, k as u64]),
        },
    )?;
    Ok(SweepCell { k, cv, fit })
}

pub fn cmd_train(cfg: &TrainRunConfig, out: &Path) -> Result<TrainOutcome> {
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let ds = Dataset::read_dir(&cfg.dataset)?;
    let classes = ds.label_set();
    if classes.len() < 2 {
        return Err(Error::Training("dataset holds fewer than 2 classes".into()));
    }

    let episodes = super::episode_class_pairs(&ds, &classes)?;
    let split = train_test_split(&episodes, classes.len(), cfg.split, cfg.seed)?;
    write_json(
        &SplitFile {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            split_fraction: cfg.split,
            train_episodes: split.train_episodes.clone(),
            test_episodes: split.test_episodes.clone(),
        },
        &out.join(crate::SPLIT_FILE),
    )?;

    let pre = PreprocessConfig {
        savgol_window: cfg.savgol_window,
        savgol_degree: cfg.savgol_degree,
    };
    let sm_all = preprocess_dataset(&ds, &pre)?;
    let train_rows: Vec<usize> = (0..sm_all.num_samples())
        .filter(|&i| split.train_episodes.contains(&sm_all.episode_ids[i]))
        .collect();
    let sm_train = sm_all.select_rows(&train_rows)?;

    let chosen = if let Some((lo, hi)) = cfg.k_sweep {
        if lo < 1 || hi < lo {
            return Err(Error::Parameter(format!("bad k sweep {lo}..{hi}")));
        }
        let mut rows = String::from("k,cv_accuracy,params\n");
        let mut best: Option<SweepCell> = None;
        for k in lo..=hi {
            let cell = fit_and_search(&sm_train, &classes, k, cfg)?;
            let _ = writeln!(
                rows,
                "{k},{},{}",
                cell.cv.best_mean_accuracy,
                csv_quote(&spectrograsp_core::classify::describe(&cell.cv.best))
            );
            let replace = match &best {
                None => true,
                Some(b) => cell.cv.best_mean_accuracy > b.cv.best_mean_accuracy,
            };
            if replace {
                best = Some(cell);
            }
        }
        let sweep_path = out.join(crate::K_SWEEP_FILE);
        fs::write(&sweep_path, rows).map_err(|e| Error::io(sweep_path.display().to_string(), e))?;
        best.unwrap()
    } else {
        fit_and_search(&sm_train, &classes, cfg.k, cfg)?
    };

    chosen.fit.model.save(&out.join(crate::NMF_MODEL_FILE))?;

    let mut table = String::from("params,mean_accuracy");
    for f in 0..cfg.folds {
        let _ = write!(table, ",fold_{f}");
    }
    table.push('\n');
    for cell in &chosen.cv.cells {
        let _ = write!(
            table,
            "{},{}",
            csv_quote(&spectrograsp_core::classify::describe(&cell.params)),
            cell.mean_accuracy
        );
        for a in &cell.fold_accuracies {
            let _ = write!(table, ",{a}");
        }
        table.push('\n');
    }
    let table_path = out.join(crate::CV_TABLE_FILE);
    fs::write(&table_path, table).map_err(|e| Error::io(table_path.display().to_string(), e))?;

    let encoded = encode_with_nmf(&sm_train, &chosen.fit.model, &classes)?;
    let final_cfg = TrainConfig {
        params: chosen.cv.best.clone(),
        seed: derive_seed(cfg.seed, &[0x66696e616c]),
        calibration_fraction: cfg.calibration_fraction,
        cv_accuracy: Some(chosen.cv.best_mean_accuracy),
    };
    let model = train(&encoded, &final_cfg)?;
    model.save(&out.join(crate::CLASSIFIER_FILE))?;
    write_json(cfg, &out.join(crate::TRAIN_CONFIG_FILE))?;

    let outcome = TrainOutcome {
        chosen_k: chosen.k,
        best_params: chosen.cv.best.clone(),
        cv_accuracy: chosen.cv.best_mean_accuracy,
        nmf_fit_error: chosen.fit.model.fit_error,
        nmf_iterations: chosen.fit.model.iterations_run,
        calibration_temperature: model.tau,
    };
    println!(
        "train: k={} cv_accuracy={:.4} tau={:.3} best={} -> {}",
        outcome.chosen_k,
        outcome.cv_accuracy,
        outcome.calibration_temperature,
        spectrograsp_core::classify::describe(&outcome.best_params),
        out.display()
    );
    Ok(outcome)
}
