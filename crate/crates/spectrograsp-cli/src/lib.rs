//! Library surface of the pipeline CLI: per-command run functions plus
//! their resolved configurations. `main` is a thin argument parser over
//! these, and the integration suites drive them in-process.

pub mod commands;
pub mod config;

use serde::{Deserialize, Serialize};

pub use commands::eval::cmd_eval;
pub use commands::gen::cmd_gen;
pub use commands::report::cmd_report;
pub use commands::stream::cmd_stream;
pub use commands::train::{cmd_train, default_grid};
pub use config::{
    EvalRunConfig, EvalSide, ReportRunConfig, StreamRunConfig, TrainRunConfig,
};

pub const NMF_MODEL_FILE: &str = "nmf_model.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const SPLIT_FILE: &str = "split.json";
pub const TRAIN_CONFIG_FILE: &str = "train_config.json";
pub const CV_TABLE_FILE: &str = "cv_table.csv";
pub const K_SWEEP_FILE: &str = "k_sweep.csv";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const STREAM_SUMMARY_FILE: &str = "summary.json";

/// Episode-level train/test assignment persisted by `train` and consumed by
/// `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFile {
    pub schema_version: u32,
    pub seed: u64,
    pub split_fraction: f64,
    pub train_episodes: Vec<u32>,
    pub test_episodes: Vec<u32>,
}

/// Quote a CSV cell that may contain commas.
pub(crate) fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}
