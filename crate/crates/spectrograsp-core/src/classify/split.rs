//! Episode-grouped stratified splitting.
//!
//! Frames within an episode are near-duplicates, so every split keeps whole
//! episodes on one side. Stratification deals each class's episodes round
//! robin across folds, which bounds per-fold class counts within one episode
//! of the global proportion.

use rand::seq::SliceRandom;

use super::LabeledVectors;
use crate::error::{Error, Result};
use crate::seed::stream_rng;

/// Episode ids assigned to each side of a train/test split.
#[derive(Debug, Clone)]
pub struct EpisodeSplit {
    pub train_episodes: Vec<u32>,
    pub test_episodes: Vec<u32>,
}

/// Group episodes by class, order deterministically, and shuffle per class.
fn class_episode_lists(
    episodes: &[(u32, usize)],
    n_classes: usize,
    seed: u64,
    salt: u64,
) -> Vec<Vec<u32>> {
    let mut per_class: Vec<Vec<u32>> = vec![Vec::new(); n_classes];
    for &(id, class) in episodes {
        per_class[class].push(id);
    }
    for (c, list) in per_class.iter_mut().enumerate() {
        list.sort_unstable();
        let mut rng = stream_rng(seed, &[salt, c as u64]);
        list.shuffle(&mut rng);
    }
    per_class
}

/// 80/20-style split over `(episode_id, class)` pairs: per class the test
/// side receives `round((1 - train_fraction) * episodes)` episodes (at least
/// one, leaving at least one for training). Class balance therefore holds
/// within one episode per class and no episode straddles the split.
pub fn train_test_split(
    episodes: &[(u32, usize)],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<EpisodeSplit> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::Parameter(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let per_class = class_episode_lists(episodes, n_classes, seed, 0x73706c69);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, list) in per_class.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        if list.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {c} has {} episode(s); need at least 2 to split",
                list.len()
            )));
        }
        let n = list.len();
        let n_test = (((1.0 - train_fraction) * n as f64).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&list[..n_test]);
        train.extend_from_slice(&list[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(EpisodeSplit {
        train_episodes: train,
        test_episodes: test,
    })
}

/// Stratified fold assignment: returns `folds` lists of episode ids. Every
/// class must have at least `folds` samples overall; episodes of a class are
/// dealt round robin with a rotating start so fold sizes stay balanced.
pub fn stratified_folds(
    data: &LabeledVectors,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if folds < 2 {
        return Err(Error::Parameter(format!("folds must be >= 2, got {folds}")));
    }
    let mut class_counts = vec![0usize; data.num_classes()];
    for &c in &data.y {
        class_counts[c] += 1;
    }
    for (c, &count) in class_counts.iter().enumerate() {
        if count > 0 && count < folds {
            return Err(Error::Stratification(format!(
                "class {c} has {count} samples, fewer than {folds} folds"
            )));
        }
    }
    let episodes = data.episodes();
    let per_class = class_episode_lists(&episodes, data.num_classes(), seed, 0x666f6c64);
    let mut fold_lists: Vec<Vec<u32>> = vec![Vec::new(); folds];
    for (c, list) in per_class.iter().enumerate() {
        for (pos, &id) in list.iter().enumerate() {
            let fold = (pos + c) % folds;
            fold_lists[fold].push(id);
        }
    }
    for list in &mut fold_lists {
        list.sort_unstable();
    }
    Ok(fold_lists)
}

/// Frame indices whose episode is in `episodes`.
pub fn frames_in_episodes(data: &LabeledVectors, episodes: &[u32]) -> Vec<usize> {
    (0..data.num_samples())
        .filter(|&i| episodes.contains(&data.episode_ids[i]))
        .collect()
}

/// Hold out roughly `fraction` of episodes per class for temperature
/// calibration, always at least one per class so the temperature sees
/// held-out data even at small episode counts. Classes with a single
/// episode contribute nothing (they must stay in training).
pub fn calibration_slice(
    data: &LabeledVectors,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let episodes = data.episodes();
    let per_class = class_episode_lists(&episodes, data.num_classes(), seed, 0x63616c69);
    let mut held = Vec::new();
    for list in &per_class {
        if list.len() < 2 {
            continue;
        }
        let n_held = ((fraction * list.len() as f64).round() as usize)
            .clamp(1, list.len() - 1);
        held.extend_from_slice(&list[..n_held]);
    }
    let core: Vec<usize> = (0..data.num_samples())
        .filter(|&i| !held.contains(&data.episode_ids[i]))
        .collect();
    let calib: Vec<usize> = (0..data.num_samples())
        .filter(|&i| held.contains(&data.episode_ids[i]))
        .collect();
    (core, calib)
}
