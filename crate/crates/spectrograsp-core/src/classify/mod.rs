//! Multiclass classification of NMF coefficient vectors.
//!
//! Four model families share one contract: a per-class score vector fed
//! through a temperature-scaled softmax. Logistic regression and the linear
//! SVM are trained one-vs-rest, the RBF SVM one-vs-one by SMO, and the MLP
//! with a native softmax head. The calibrated probabilities double as the
//! observation likelihood for the recursive Bayes filter.

mod eval;
mod linear_svm;
mod logistic;
mod mlp;
mod rbf_svm;
mod search;
mod split;
mod temperature;

pub use eval::{evaluate, metrics_from_confusion, EvalMetrics, EvalReport};
pub use linear_svm::train_linear_svm;
pub use logistic::train_logistic;
pub use mlp::train_mlp;
pub use rbf_svm::{kkt_violation, train_binary_rbf, train_rbf_ovo, BinarySvmSolution};
pub use search::{describe, grid_search_cv, CvCell, CvOutcome, GridSearchConfig};
pub use split::{stratified_folds, train_test_split, EpisodeSplit};
pub use temperature::{fit_temperature, softmax_with_temperature};

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SCHEMA_VERSION: u32 = 1;

/// The four spectral model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Logistic,
    LinearSvm,
    RbfSvm,
    Mlp,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Family::Logistic),
            "linear-svm" => Ok(Family::LinearSvm),
            "rbf-svm" => Ok(Family::RbfSvm),
            "mlp" => Ok(Family::Mlp),
            other => Err(Error::Parameter(format!(
                "unknown family {other:?} (expected logistic, linear-svm, rbf-svm, mlp)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::LinearSvm => "linear-svm",
            Family::RbfSvm => "rbf-svm",
            Family::Mlp => "mlp",
        }
    }
}

/// Labeled coefficient vectors: one row per frame, labels as indices into
/// the ordered `classes` list, episode ids for grouped splitting.
#[derive(Debug, Clone)]
pub struct LabeledVectors {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub episode_ids: Vec<u32>,
    pub classes: Vec<String>,
}

impl LabeledVectors {
    pub fn new(
        x: Array2<f64>,
        y: Vec<usize>,
        episode_ids: Vec<u32>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || episode_ids.len() != n {
            return Err(Error::Dimension(format!(
                "{n} rows but {} labels and {} episode ids",
                y.len(),
                episode_ids.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= classes.len()) {
            return Err(Error::Parameter(format!(
                "label index {bad} out of range for {} classes",
                classes.len()
            )));
        }
        Ok(Self {
            x,
            y,
            episode_ids,
            classes,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Distinct classes that actually appear.
    pub fn present_classes(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for &c in &self.y {
            counts[c] += 1;
        }
        (0..self.classes.len()).filter(|&c| counts[c] > 0).collect()
    }

    /// The subset of rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let x = self.x.select(ndarray::Axis(0), indices);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        let episode_ids = indices.iter().map(|&i| self.episode_ids[i]).collect();
        Self {
            x,
            y,
            episode_ids,
            classes: self.classes.clone(),
        }
    }

    /// Unique (episode_id, class) pairs sorted by episode id.
    pub fn episodes(&self) -> Vec<(u32, usize)> {
        let mut out: Vec<(u32, usize)> = Vec::new();
        for i in 0..self.num_samples() {
            let e = self.episode_ids[i];
            if !out.iter().any(|(id, _)| *id == e) {
                out.push((e, self.y[i]));
            }
        }
        out.sort_unstable_by_key(|(id, _)| *id);
        out
    }
}

/// Family-specific hyperparameters. The variant fixes the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum HyperParams {
    Logistic(LogisticParams),
    LinearSvm(LinearSvmParams),
    RbfSvm(RbfSvmParams),
    Mlp(MlpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmParams {
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSvmParams {
    pub c: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
}

impl HyperParams {
    pub fn family(&self) -> Family {
        match self {
            HyperParams::Logistic(_) => Family::Logistic,
            HyperParams::LinearSvm(_) => Family::LinearSvm,
            HyperParams::RbfSvm(_) => Family::RbfSvm,
            HyperParams::Mlp(_) => Family::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HyperParams::Logistic(p) => {
                if p.l2 < 0.0 || p.learning_rate <= 0.0 || p.epochs == 0 || p.batch_size == 0 {
                    return Err(Error::Parameter(format!("bad logistic params {p:?}")));
                }
            }
            HyperParams::LinearSvm(p) => {
                if p.c <= 0.0 {
                    return Err(Error::Parameter("linear-svm requires C > 0".into()));
                }
            }
            HyperParams::RbfSvm(p) => {
                if p.c <= 0.0 || p.gamma <= 0.0 {
                    return Err(Error::Parameter("rbf-svm requires C > 0 and gamma > 0".into()));
                }
            }
            HyperParams::Mlp(p) => {
                if p.hidden.is_empty() || p.hidden.len() > 2 {
                    return Err(Error::Parameter("mlp takes 1 or 2 hidden layers".into()));
                }
                if p.hidden.iter().any(|&u| !(8..=256).contains(&u)) {
                    return Err(Error::Parameter(
                        "mlp hidden layers must have 8..=256 units".into(),
                    ));
                }
                if p.learning_rate <= 0.0 || p.epochs == 0 || p.batch_size == 0 || p.l2 < 0.0 {
                    return Err(Error::Parameter(format!("bad mlp params {p:?}")));
                }
            }
        }
        Ok(())
    }

    /// Sort key ordering grid points from strongest to weakest regularization,
    /// then lexicographically. Grid-search ties resolve toward the smaller key.
    pub fn tie_break_key(&self) -> Vec<f64> {
        match self {
            HyperParams::Logistic(p) => vec![
                -p.l2,
                p.learning_rate,
                p.epochs as f64,
                p.batch_size as f64,
            ],
            HyperParams::LinearSvm(p) => vec![p.c],
            HyperParams::RbfSvm(p) => vec![p.c, p.gamma],
            HyperParams::Mlp(p) => {
                let units: usize = p.hidden.iter().sum();
                vec![
                    p.hidden.len() as f64,
                    units as f64,
                    -p.l2,
                    p.learning_rate,
                    p.epochs as f64,
                ]
            }
        }
    }
}

/// Per-class linear weights (logistic and linear SVM): `score = w.x + b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearWeights {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// One trained one-vs-one subproblem. `sv_idx` points into the shared
/// support-vector matrix; `coef` holds `alpha_i * y_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairClassifier {
    pub class_a: usize,
    pub class_b: usize,
    pub sv_idx: Vec<u32>,
    pub coef: Vec<f64>,
    pub bias: f64,
}

/// One-vs-one RBF SVM: support vectors deduplicated across pairs so a
/// prediction evaluates each unique kernel column once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfWeights {
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub pairs: Vec<PairClassifier>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpWeights {
    pub layers: Vec<MlpLayer>,
    /// Hidden activation tag; only the rectifier is implemented.
    pub activation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyParams {
    Linear(LinearWeights),
    Rbf(RbfWeights),
    Mlp(MlpWeights),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub grid_point: HyperParams,
    pub cv_accuracy: Option<f64>,
}

/// A trained multiclass model with calibrated probability output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub schema_version: u32,
    pub family: Family,
    pub classes: Vec<String>,
    pub k_in: usize,
    pub tau: f64,
    pub params: FamilyParams,
    pub train_meta: TrainMeta,
}

/// Training knobs that are not part of the hyperparameter grid.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub params: HyperParams,
    pub seed: u64,
    /// Fraction of training episodes held out for temperature calibration.
    /// Zero disables calibration and leaves tau = 1.
    pub calibration_fraction: f64,
    pub cv_accuracy: Option<f64>,
}

impl TrainConfig {
    pub fn new(params: HyperParams, seed: u64) -> Self {
        Self {
            params,
            seed,
            calibration_fraction: 0.1,
            cv_accuracy: None,
        }
    }

    pub fn without_calibration(mut self) -> Self {
        self.calibration_fraction = 0.0;
        self
    }
}

/// Train one model. Deterministic for a fixed seed.
pub fn train(data: &LabeledVectors, cfg: &TrainConfig) -> Result<ClassifierModel> {
    cfg.params.validate()?;
    if data.num_samples() == 0 {
        return Err(Error::Parameter("training data is empty".into()));
    }
    let present = data.present_classes();
    if present.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 classes, got {}",
            present.len()
        )));
    }

    // Hold out a calibration slice of whole episodes, stratified by class.
    let (core_idx, calib_idx) = if cfg.calibration_fraction > 0.0 {
        split::calibration_slice(data, cfg.calibration_fraction, cfg.seed)
    } else {
        ((0..data.num_samples()).collect(), Vec::new())
    };
    let core = data.subset(&core_idx);
    if core.present_classes().len() < 2 {
        return Err(Error::Training(
            "calibration slice removed all but one class".into(),
        ));
    }

    let n_classes = data.num_classes();
    let params = match &cfg.params {
        HyperParams::Logistic(p) => {
            FamilyParams::Linear(train_logistic(&core.x, &core.y, n_classes, p, cfg.seed)?)
        }
        HyperParams::LinearSvm(p) => {
            FamilyParams::Linear(train_linear_svm(&core.x, &core.y, n_classes, p, cfg.seed)?)
        }
        HyperParams::RbfSvm(p) => {
            FamilyParams::Rbf(train_rbf_ovo(&core.x, &core.y, n_classes, p)?)
        }
        HyperParams::Mlp(p) => {
            FamilyParams::Mlp(train_mlp(&core.x, &core.y, n_classes, p, cfg.seed)?)
        }
    };

    let mut model = ClassifierModel {
        schema_version: SCHEMA_VERSION,
        family: cfg.params.family(),
        classes: data.classes.clone(),
        k_in: data.num_features(),
        tau: 1.0,
        params,
        train_meta: TrainMeta {
            seed: cfg.seed,
            grid_point: cfg.params.clone(),
            cv_accuracy: cfg.cv_accuracy,
        },
    };

    if !calib_idx.is_empty() {
        let calib = data.subset(&calib_idx);
        let mut scores = Array2::zeros((calib.num_samples(), n_classes));
        for i in 0..calib.num_samples() {
            let s = model.scores(calib.x.row(i).as_slice().unwrap())?;
            for (j, v) in s.iter().enumerate() {
                scores[[i, j]] = *v;
            }
        }
        model.tau = fit_temperature(&scores, &calib.y);
    }
    Ok(model)
}

impl ClassifierModel {
    /// Per-class aggregate scores before the softmax: native scores for the
    /// linear families and the MLP, signed pairwise margin sums for the
    /// one-vs-one RBF SVM.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.k_in {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.k_in
            )));
        }
        let n = self.classes.len();
        match &self.params {
            FamilyParams::Linear(lw) => {
                let mut s = vec![0.0; n];
                for (c, (w, b)) in lw.weights.iter().zip(&lw.biases).enumerate() {
                    s[c] = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
                }
                Ok(s)
            }
            FamilyParams::Rbf(rw) => {
                let kernel: Vec<f64> = rw
                    .support_vectors
                    .iter()
                    .map(|sv| {
                        let d2: f64 = sv
                            .iter()
                            .zip(x)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (-rw.gamma * d2).exp()
                    })
                    .collect();
                let mut s = vec![0.0; n];
                for pair in &rw.pairs {
                    let mut f = pair.bias;
                    for (idx, coef) in pair.sv_idx.iter().zip(&pair.coef) {
                        f += coef * kernel[*idx as usize];
                    }
                    s[pair.class_a] += f;
                    s[pair.class_b] -= f;
                }
                Ok(s)
            }
            FamilyParams::Mlp(mw) => Ok(mlp::forward_single(mw, x)),
        }
    }

    /// Calibrated class probabilities: softmax of `scores / tau`. Entries are
    /// strictly positive and sum to 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.scores(x)?;
        Ok(softmax_with_temperature(&s, self.tau))
    }

    /// Predicted class index: argmax of `predict_proba`, ties broken toward
    /// the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(argmax(&p))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Parameter(format!("serialize classifier: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: ClassifierModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(Error::Compatibility(format!(
                "classifier schema {} unsupported (expected {SCHEMA_VERSION})",
                model.schema_version
            )));
        }
        if model.tau <= 0.0 {
            return Err(Error::Domain(format!("tau must be positive, got {}", model.tau)));
        }
        Ok(model)
    }
}

/// Scale-adaptive default RBF kernel width: `1 / (k * mean feature
/// variance)`, the usual starting point for gamma grids.
pub fn default_gamma(x: &Array2<f64>) -> f64 {
    let n = x.nrows() as f64;
    let k = x.ncols();
    let mut var_sum = 0.0;
    for j in 0..k {
        let col = x.column(j);
        let mean = col.sum() / n;
        var_sum += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    let mean_var = var_sum / k as f64;
    if mean_var > 0.0 {
        1.0 / (k as f64 * mean_var)
    } else {
        1.0
    }
}

/// Index of the largest entry; the first wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
