// Temporary diagnostics: per-distance-bucket frame accuracy, within-pair
// discrimination, and per-frame top-probability profiles.

use std::path::PathBuf;

use spectrograsp_core::classify::argmax;
use spectrograsp_core::dataset::Dataset;
use spectrograsp_core::nmf::NmfModel;
use spectrograsp_core::pipeline::{encode_with_nmf, preprocess_dataset, PreprocessConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let data_dir = PathBuf::from(&args[1]);
    let model_dir = PathBuf::from(&args[2]);

    let ds = Dataset::read_dir(&data_dir).unwrap();
    let nmf = NmfModel::load_for_grid(&model_dir.join("nmf_model.json"), &ds.grid).unwrap();
    let clf = spectrograsp_core::classify::ClassifierModel::load(&model_dir.join("classifier.json"))
        .unwrap();
    let split: spectrograsp_cli::SplitFile =
        spectrograsp_cli::config::load_json_config(&model_dir.join("split.json")).unwrap();

    let pre = PreprocessConfig::default();
    let sm_all = preprocess_dataset(&ds, &pre).unwrap();
    let rows: Vec<usize> = (0..sm_all.num_samples())
        .filter(|&i| split.test_episodes.contains(&sm_all.episode_ids[i]))
        .collect();
    let sm = sm_all.select_rows(&rows).unwrap();
    let test = encode_with_nmf(&sm, &nmf, &clf.classes).unwrap();

    // Distance per selected frame.
    let dists: Vec<f64> = rows
        .iter()
        .map(|&i| ds.frames[i].frame.distance.unwrap_or(-1.0))
        .collect();

    let buckets = [(7.0, 8.6), (5.0, 7.0), (3.0, 5.0), (1.5, 3.0), (0.9, 1.5)];
    let mut bucket_stats = vec![(0usize, 0usize, 0.0f64); buckets.len()];
    let mut pair_ok = 0usize;
    let mut pair_n = 0usize;
    let mut pair_by_bucket = vec![(0usize, 0usize); buckets.len()];

    for i in 0..test.num_samples() {
        let x = test.x.row(i);
        let probs = clf.predict_proba(x.as_slice().unwrap()).unwrap();
        let pred = argmax(&probs);
        let truth = test.y[i];
        let label = &clf.classes[truth];
        // Pair partner label: flip the trailing real/fake.
        let partner = if let Some(stem) = label.strip_suffix("_real") {
            format!("{stem}_fake")
        } else {
            format!("{}_real", label.strip_suffix("_fake").unwrap())
        };
        let partner_idx = clf.classes.iter().position(|c| *c == partner).unwrap();
        let within = probs[truth] > probs[partner_idx];
        pair_ok += usize::from(within);
        pair_n += 1;

        for (bi, &(lo, hi)) in buckets.iter().enumerate() {
            if dists[i] >= lo && dists[i] < hi {
                bucket_stats[bi].0 += 1;
                bucket_stats[bi].1 += usize::from(pred == truth);
                bucket_stats[bi].2 += probs[pred];
                pair_by_bucket[bi].0 += 1;
                pair_by_bucket[bi].1 += usize::from(within);
            }
        }
    }

    println!("tau = {}", clf.tau);
    println!("within-pair discrimination (all test frames): {:.4}", pair_ok as f64 / pair_n as f64);
    for (bi, &(lo, hi)) in buckets.iter().enumerate() {
        let (n, ok, conf) = bucket_stats[bi];
        let (pn, pok) = pair_by_bucket[bi];
        if n > 0 {
            println!(
                "d in [{lo:.1},{hi:.1}): n={n:5}  acc={:.4}  mean_top_prob={:.4}  within_pair={:.4}",
                ok as f64 / n as f64,
                conf / n as f64,
                pok as f64 / pn as f64
            );
        }
    }
}
