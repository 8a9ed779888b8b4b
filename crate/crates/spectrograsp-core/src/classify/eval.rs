//! Frame-level evaluation: accuracy, macro-averaged F1, confusion counts,
//! and wall-clock single-sample inference statistics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ClassifierModel, LabeledVectors};
use crate::error::{Error, Result};

/// Deterministic metrics derived from a confusion matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `confusion[true_class][predicted_class]` counts.
    pub confusion: Vec<Vec<u64>>,
    pub per_class_accuracy: Vec<f64>,
    pub mean_inference_s: f64,
    pub std_inference_s: f64,
}

/// Accuracy, macro F1 and per-class recall from a confusion matrix.
///
/// Macro F1 averages over the classes present in the test set (nonzero row
/// sum); a class that is present but never predicted correctly contributes 0.
/// Per-class accuracy is recall, reported as 0 for absent classes.
pub fn metrics_from_confusion(confusion: &[Vec<u64>]) -> EvalMetrics {
    let n = confusion.len();
    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let accuracy = if total > 0 {
        trace as f64 / total as f64
    } else {
        0.0
    };
    let mut per_class_accuracy = vec![0.0; n];
    let mut f1_sum = 0.0;
    let mut f1_count = 0usize;
    for c in 0..n {
        let row_sum: u64 = confusion[c].iter().sum();
        let col_sum: u64 = (0..n).map(|r| confusion[r][c]).sum();
        let tp = confusion[c][c] as f64;
        if row_sum > 0 {
            per_class_accuracy[c] = tp / row_sum as f64;
            let precision = if col_sum > 0 { tp / col_sum as f64 } else { 0.0 };
            let recall = tp / row_sum as f64;
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            f1_sum += f1;
            f1_count += 1;
        }
    }
    EvalMetrics {
        accuracy,
        macro_f1: f1_sum / f1_count.max(1) as f64,
        per_class_accuracy,
    }
}

/// Evaluate a model on labeled vectors. Predictions iterate single samples
/// so the timing statistics reflect streaming inference.
pub fn evaluate(model: &ClassifierModel, test: &LabeledVectors) -> Result<EvalReport> {
    if test.num_samples() == 0 {
        return Err(Error::Parameter("test set is empty".into()));
    }
    if test.classes != model.classes {
        return Err(Error::Compatibility(
            "test label set differs from the model's class list".into(),
        ));
    }
    if test.num_features() != model.k_in {
        return Err(Error::Dimension(format!(
            "test vectors have {} features, model expects {}",
            test.num_features(),
            model.k_in
        )));
    }
    let n_classes = model.classes.len();
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let mut times = Vec::with_capacity(test.num_samples());
    for i in 0..test.num_samples() {
        let row = test.x.row(i);
        let x = row.as_slice().unwrap();
        let start = Instant::now();
        let pred = model.predict(x)?;
        times.push(start.elapsed().as_secs_f64());
        confusion[test.y[i]][pred] += 1;
    }
    let metrics = metrics_from_confusion(&confusion);
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / times.len() as f64;
    Ok(EvalReport {
        accuracy: metrics.accuracy,
        macro_f1: metrics.macro_f1,
        confusion,
        per_class_accuracy: metrics.per_class_accuracy,
        mean_inference_s: mean,
        std_inference_s: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{train, HyperParams, LinearSvmParams, TrainConfig};
    use ndarray::Array2;

    fn separable() -> LabeledVectors {
        // Triangle corners: every class is linearly separable from the rest.
        let corners = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut eps = Vec::new();
        for c in 0..3usize {
            for e in 0..2 {
                for f in 0..2 {
                    rows.push([corners[c][0] + f as f64 * 0.1, corners[c][1]]);
                    y.push(c);
                    eps.push((c * 2 + e) as u32);
                }
            }
        }
        let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
        LabeledVectors::new(
            x,
            y,
            eps,
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    #[test]
    fn memorized_training_set_scores_one() {
        let data = separable();
        let cfg = TrainConfig::new(HyperParams::LinearSvm(LinearSvmParams { c: 10.0 }), 1)
            .without_calibration();
        let model = train(&data, &cfg).unwrap();
        let report = evaluate(&model, &data).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.macro_f1, 1.0);
        // Confusion row sums equal per-class test counts.
        for (c, row) in report.confusion.iter().enumerate() {
            let count = data.y.iter().filter(|&&v| v == c).count() as u64;
            assert_eq!(row.iter().sum::<u64>(), count);
        }
    }

    #[test]
    fn deranged_labels_score_zero() {
        let data = separable();
        let cfg = TrainConfig::new(HyperParams::LinearSvm(LinearSvmParams { c: 10.0 }), 1)
            .without_calibration();
        let model = train(&data, &cfg).unwrap();
        // Relabel every class by the derangement (0 1 2) -> (1 2 0).
        let deranged = LabeledVectors::new(
            data.x.clone(),
            data.y.iter().map(|&c| (c + 1) % 3).collect(),
            data.episode_ids.clone(),
            data.classes.clone(),
        )
        .unwrap();
        let report = evaluate(&model, &deranged).unwrap();
        assert_eq!(report.accuracy, 0.0);
    }

    #[test]
    fn macro_f1_matches_hand_arithmetic_on_fixture() {
        // 3 classes, 9 samples:
        //            predicted
        //  true      a  b  c
        //    a      [2, 1, 0]
        //    b      [0, 2, 1]
        //    c      [1, 0, 2]
        // precision = 2/3 for every class, recall = 2/3 for every class,
        // so per-class F1 = 2/3 and macro F1 = 2/3; accuracy = 6/9.
        let confusion = vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 0, 2]];
        let m = metrics_from_confusion(&confusion);
        assert!((m.accuracy - 6.0 / 9.0).abs() < 1e-12);
        assert!((m.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.per_class_accuracy, vec![2.0 / 3.0; 3]);

        // An asymmetric fixture exercises the precision != recall path:
        //    a      [3, 0, 0]
        //    b      [2, 1, 0]
        //    c      [0, 0, 3]
        // class a: p = 3/5, r = 1, f1 = 3/4
        // class b: p = 1,   r = 1/3, f1 = 1/2
        // class c: p = 1,   r = 1, f1 = 1
        let confusion = vec![vec![3, 0, 0], vec![2, 1, 0], vec![0, 0, 3]];
        let m = metrics_from_confusion(&confusion);
        let expected = (0.75 + 0.5 + 1.0) / 3.0;
        assert!((m.macro_f1 - expected).abs() < 1e-12, "{}", m.macro_f1);
        assert!((m.accuracy - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_classes_are_rejected() {
        let data = separable();
        let cfg = TrainConfig::new(HyperParams::LinearSvm(LinearSvmParams { c: 1.0 }), 1)
            .without_calibration();
        let model = train(&data, &cfg).unwrap();
        let other = LabeledVectors::new(
            data.x.clone(),
            data.y.clone(),
            data.episode_ids.clone(),
            vec!["x".into(), "y".into(), "z".into()],
        )
        .unwrap();
        assert!(matches!(
            evaluate(&model, &other),
            Err(Error::Compatibility(_))
        ));
    }
}
