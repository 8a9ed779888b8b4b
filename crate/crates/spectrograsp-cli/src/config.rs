//! Resolved per-command run configurations. Every command writes its
//! resolved config next to its outputs so runs are reproducible from the
//! artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spectrograsp_core::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub dataset: PathBuf,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_family")]
    pub family: String,
    #[serde(default = "d_k")]
    pub k: usize,
    /// Inclusive component-count sweep; when set, the accuracy-vs-k table is
    /// emitted and the best k is used for the final model.
    #[serde(default)]
    pub k_sweep: Option<(usize, usize)>,
    #[serde(default = "d_folds")]
    pub folds: usize,
    #[serde(default = "d_split")]
    pub split: f64,
    #[serde(default = "d_window")]
    pub savgol_window: usize,
    #[serde(default = "d_degree")]
    pub savgol_degree: usize,
    #[serde(default = "d_nmf_max_iter")]
    pub nmf_max_iter: usize,
    #[serde(default = "d_nmf_tol")]
    pub nmf_tol: f64,
    #[serde(default = "d_calibration_fraction")]
    pub calibration_fraction: f64,
}

fn d_seed() -> u64 {
    42
}
fn d_family() -> String {
    "rbf-svm".into()
}
fn d_k() -> usize {
    10
}
fn d_folds() -> usize {
    5
}
fn d_split() -> f64 {
    0.8
}
fn d_window() -> usize {
    17
}
fn d_degree() -> usize {
    5
}
fn d_nmf_max_iter() -> usize {
    500
}
fn d_nmf_tol() -> f64 {
    1e-5
}
fn d_calibration_fraction() -> f64 {
    0.1
}

impl TrainRunConfig {
    pub fn new(dataset: PathBuf) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset,
            seed: d_seed(),
            family: d_family(),
            k: d_k(),
            k_sweep: None,
            folds: d_folds(),
            split: d_split(),
            savgol_window: d_window(),
            savgol_degree: d_degree(),
            nmf_max_iter: d_nmf_max_iter(),
            nmf_tol: d_nmf_tol(),
            calibration_fraction: d_calibration_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSide {
    Test,
    Train,
}

impl EvalSide {
    pub fn name(&self) -> &'static str {
        match self {
            EvalSide::Test => "test",
            EvalSide::Train => "train",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub dataset: PathBuf,
    pub model_dir: PathBuf,
    #[serde(default = "d_side")]
    pub on: EvalSide,
}

fn d_side() -> EvalSide {
    EvalSide::Test
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamRunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub dataset: PathBuf,
    pub model_dir: PathBuf,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
    /// When set, stream this many freshly generated episodes (balanced over
    /// classes, seeded by `fresh_seed`) instead of the dataset's episodes.
    #[serde(default)]
    pub fresh_episodes: Option<usize>,
    #[serde(default = "d_fresh_seed")]
    pub fresh_seed: u64,
}

fn d_kappa() -> f64 {
    0.95
}
fn d_n_max() -> usize {
    65
}
fn d_fresh_seed() -> u64 {
    777
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub dataset: PathBuf,
    #[serde(default)]
    pub train_dir: Option<PathBuf>,
    #[serde(default)]
    pub stream_dir: Option<PathBuf>,
    #[serde(default = "d_window")]
    pub savgol_window: usize,
    #[serde(default = "d_degree")]
    pub savgol_degree: usize,
}

pub fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parameter(format!("serialize {}: {e}", path.display())))?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}
