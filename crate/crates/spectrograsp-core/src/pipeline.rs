//! Shared end-to-end steps: frame -> reflectance -> coefficients -> class
//! probabilities. Both the CLI commands and the streaming filter build on
//! these so training and inference see identical preprocessing.

use ndarray::Array2;

use crate::classify::{ClassifierModel, LabeledVectors};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nmf::{NmfModel, SpectraMatrix, DEFAULT_TRANSFORM_MAX_ITER, DEFAULT_TRANSFORM_TOL};
use crate::par::par_map;
use crate::spectra::{calibrate, savgol_smooth, CalibrationPair, RawFrame};

/// Preprocessing applied to every frame before projection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreprocessConfig {
    pub savgol_window: usize,
    pub savgol_degree: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        // Degree 5 in keeping with the instrument pipeline; window 17 is
        // short relative to spectral features and comfortably above the
        // degree. Both are exposed as configuration.
        Self {
            savgol_window: 17,
            savgol_degree: 5,
        }
    }
}

/// Calibrated, smoothed reflectance values for one frame.
pub fn reflectance_row(
    frame: &RawFrame,
    cal: &CalibrationPair,
    cfg: &PreprocessConfig,
) -> Result<Vec<f64>> {
    let curve = calibrate(frame, cal)?;
    let smoothed = savgol_smooth(&curve, cfg.savgol_window, cfg.savgol_degree)?;
    Ok(smoothed.values)
}

/// Preprocess a whole dataset into a reflectance matrix (frames in file
/// order). Parallel across frames; results are order-stable.
pub fn preprocess_dataset(ds: &Dataset, cfg: &PreprocessConfig) -> Result<SpectraMatrix> {
    let n = ds.frames.len();
    if n == 0 {
        return Err(Error::Parameter("dataset has no frames".into()));
    }
    let c = ds.grid.len();
    let rows = par_map(n, |i| reflectance_row(&ds.frames[i].frame, &ds.calibration, cfg));
    let mut matrix = Array2::zeros((n, c));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| e.at_frame(i))?;
        for (j, v) in row.into_iter().enumerate() {
            matrix[[i, j]] = v;
        }
    }
    let labels = ds.frames.iter().map(|f| f.label.clone()).collect();
    let episode_ids = ds.frames.iter().map(|f| f.episode_id).collect();
    SpectraMatrix::new(matrix, labels, episode_ids, ds.grid.content_hash())
}

/// Project every row of a reflectance matrix onto the NMF basis and attach
/// labels as indices into `classes`.
pub fn encode_with_nmf(
    sm: &SpectraMatrix,
    model: &NmfModel,
    classes: &[String],
) -> Result<LabeledVectors> {
    if sm.grid_hash != model.grid_hash {
        return Err(Error::Compatibility(format!(
            "matrix grid hash {:016x} differs from model grid hash {:016x}",
            sm.grid_hash, model.grid_hash
        )));
    }
    let n = sm.num_samples();
    let coded = par_map(n, |i| {
        nmf_code(sm.rows.row(i).as_slice().unwrap(), model)
    });
    let mut x = Array2::zeros((n, model.k));
    for (i, row) in coded.into_iter().enumerate() {
        let row = row.map_err(|e| e.at_frame(i))?;
        for (j, v) in row.into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    let mut y = Vec::with_capacity(n);
    for label in &sm.labels {
        let idx = classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::Parameter(format!("label {label:?} not in class list")))?;
        y.push(idx);
    }
    LabeledVectors::new(x, y, sm.episode_ids.clone(), classes.to_vec())
}

/// One reflectance vector -> NMF coefficients with the default projection
/// schedule.
pub fn nmf_code(values: &[f64], model: &NmfModel) -> Result<Vec<f64>> {
    crate::nmf::nmf_transform(
        values,
        model,
        DEFAULT_TRANSFORM_MAX_ITER,
        DEFAULT_TRANSFORM_TOL,
    )
}

/// Full single-frame inference: calibrate, smooth, project, and return the
/// calibrated class probabilities.
pub fn classify_frame(
    frame: &RawFrame,
    cal: &CalibrationPair,
    nmf: &NmfModel,
    clf: &ClassifierModel,
    cfg: &PreprocessConfig,
) -> Result<Vec<f64>> {
    let values = reflectance_row(frame, cal, cfg)?;
    let code = nmf_code(&values, nmf)?;
    clf.predict_proba(&code)
}
