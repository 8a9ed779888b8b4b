pub mod eval;
pub mod gen;
pub mod report;
pub mod stream;
pub mod train;

use std::path::Path;

use spectrograsp_core::classify::ClassifierModel;
use spectrograsp_core::dataset::Dataset;
use spectrograsp_core::error::{Error, Result};
use spectrograsp_core::nmf::NmfModel;
use spectrograsp_core::pipeline::PreprocessConfig;

use crate::config::{load_json_config, TrainRunConfig};
use crate::SplitFile;

/// Everything `eval` and `stream` need from a training run directory,
/// cross-checked against the dataset it is applied to.
pub(crate) struct ModelBundle {
    pub nmf: NmfModel,
    pub clf: ClassifierModel,
    pub split: SplitFile,
    pub preprocess: PreprocessConfig,
}

pub(crate) fn load_model_bundle(model_dir: &Path, dataset: &Dataset) -> Result<ModelBundle> {
    let nmf = NmfModel::load_for_grid(&model_dir.join(crate::NMF_MODEL_FILE), &dataset.grid)?;
    let clf = ClassifierModel::load(&model_dir.join(crate::CLASSIFIER_FILE))?;
    if clf.k_in != nmf.k {
        return Err(Error::Compatibility(format!(
            "classifier expects {} features, NMF model provides {}",
            clf.k_in, nmf.k
        )));
    }
    let split: SplitFile = load_json_config(&model_dir.join(crate::SPLIT_FILE))?;
    let train_cfg: TrainRunConfig = load_json_config(&model_dir.join(crate::TRAIN_CONFIG_FILE))?;
    Ok(ModelBundle {
        nmf,
        clf,
        split,
        preprocess: PreprocessConfig {
            savgol_window: train_cfg.savgol_window,
            savgol_degree: train_cfg.savgol_degree,
        },
    })
}

/// Map dataset labels onto class indices of an ordered class list.
pub(crate) fn episode_class_pairs(
    dataset: &Dataset,
    classes: &[String],
) -> Result<Vec<(u32, usize)>> {
    dataset
        .episode_labels()
        .into_iter()
        .map(|(id, label)| {
            classes
                .iter()
                .position(|c| *c == label)
                .map(|idx| (id, idx))
                .ok_or_else(|| Error::Parameter(format!("label {label:?} not in class list")))
        })
        .collect()
}
