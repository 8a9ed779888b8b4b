//! `eval`: frame-level evaluation of a trained model on one side of the
//! stored episode split. Deterministic metrics and volatile timing go to
//! separate files so identical runs produce byte-identical primary outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use spectrograsp_core::classify::evaluate;
use spectrograsp_core::dataset::Dataset;
use spectrograsp_core::error::{Error, Result};
use spectrograsp_core::pipeline::{encode_with_nmf, preprocess_dataset};

use crate::config::{write_json, EvalRunConfig, EvalSide, SCHEMA_VERSION};
use crate::csv_quote;

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub schema_version: u32,
    pub side: EvalSide,
    pub n_frames: usize,
    pub n_episodes: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_accuracy: Vec<f64>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct TimingFile {
    schema_version: u32,
    side: EvalSide,
    n_predictions: usize,
    mean_inference_s: f64,
    std_inference_s: f64,
}

pub fn cmd_eval(cfg: &EvalRunConfig, out: &Path) -> Result<EvalSummary> {
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let ds = Dataset::read_dir(&cfg.dataset)?;
    let bundle = super::load_model_bundle(&cfg.model_dir, &ds)?;

    let episodes = match cfg.on {
        EvalSide::Test => &bundle.split.test_episodes,
        EvalSide::Train => &bundle.split.train_episodes,
    };
    let sm_all = preprocess_dataset(&ds, &bundle.preprocess)?;
    let rows: Vec<usize> = (0..sm_all.num_samples())
        .filter(|&i| episodes.contains(&sm_all.episode_ids[i]))
        .collect();
    if rows.is_empty() {
        return Err(Error::Parameter(format!(
            "no {} episodes found in the dataset",
            cfg.on.name()
        )));
    }
    let sm = sm_all.select_rows(&rows)?;
    let data = encode_with_nmf(&sm, &bundle.nmf, &bundle.clf.classes)?;
    let report = evaluate(&bundle.clf, &data)?;

    let side = cfg.on.name();
    let summary = EvalSummary {
        schema_version: SCHEMA_VERSION,
        side: cfg.on,
        n_frames: data.num_samples(),
        n_episodes: episodes.len(),
        accuracy: report.accuracy,
        macro_f1: report.macro_f1,
        per_class_accuracy: report.per_class_accuracy.clone(),
        classes: bundle.clf.classes.clone(),
    };
    write_json(&summary, &out.join(format!("report_{side}.json")))?;
    write_json(
        &TimingFile {
            schema_version: SCHEMA_VERSION,
            side: cfg.on,
            n_predictions: data.num_samples(),
            mean_inference_s: report.mean_inference_s,
            std_inference_s: report.std_inference_s,
        },
        &out.join(format!("timing_{side}.json")),
    )?;

    let mut csv = String::from("true_class");
    for c in &bundle.clf.classes {
        let _ = write!(csv, ",{}", csv_quote(c));
    }
    csv.push('\n');
    for (ci, row) in report.confusion.iter().enumerate() {
        let _ = write!(csv, "{}", csv_quote(&bundle.clf.classes[ci]));
        for v in row {
            let _ = write!(csv, ",{v}");
        }
        csv.push('\n');
    }
    let confusion_path = out.join(format!("confusion_{side}.csv"));
    fs::write(&confusion_path, csv)
        .map_err(|e| Error::io(confusion_path.display().to_string(), e))?;
    write_json(cfg, &out.join("eval_config.json"))?;

    println!(
        "eval[{side}]: accuracy={:.4} macro_f1={:.4} over {} frames ({} episodes), inference {:.1} us/frame -> {}",
        summary.accuracy,
        summary.macro_f1,
        summary.n_frames,
        summary.n_episodes,
        report.mean_inference_s * 1e6,
        out.display()
    );
    Ok(summary)
}
