//! `gen`: write a synthetic grasp dataset directory.

use std::path::Path;

use spectrograsp_core::error::Result;
use spectrograsp_core::simgrasp::{generate_dataset, DatasetSummary, GenConfig};

/// Generate a dataset at `out`. The resolved generator config lands in the
/// dataset directory as `gen_config.json`.
pub fn cmd_gen(cfg: &GenConfig, out: &Path) -> Result<DatasetSummary> {
    let summary = generate_dataset(cfg, out)?;
    println!(
        "gen: {} classes, {} episodes, {} frames -> {}",
        summary.classes,
        summary.episodes,
        summary.frames,
        out.display()
    );
    Ok(summary)
}
