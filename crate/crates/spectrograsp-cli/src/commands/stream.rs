//! `stream`: run the recursive Bayes filter over grasp episodes and emit
//! JSON-lines traces plus a decision summary. Episodes come either from the
//! dataset directory or from the generator (fresh seeds, same profiles).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use spectrograsp_core::belief::{run_episode, DecisionPolicy, EpisodeTrace};
use spectrograsp_core::dataset::Dataset;
use spectrograsp_core::error::{Error, Result};
use spectrograsp_core::par::par_map;
use spectrograsp_core::seed::derive_seed;
use spectrograsp_core::simgrasp::{generate_episode, make_profiles, GenConfig, MaterialClass};
use spectrograsp_core::spectra::RawFrame;

use crate::config::{write_json, StreamRunConfig, SCHEMA_VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct StreamSummary {
    pub schema_version: u32,
    pub episodes: usize,
    pub kappa: f64,
    pub n_max: usize,
    pub decision_accuracy: f64,
    pub forced_decisions: usize,
    /// Mean number of frames consumed before the decision.
    pub mean_frames_to_decision: f64,
    /// Mean frames between entering grasp range and the decision (0 when
    /// the filter had already decided on approach).
    pub mean_frames_from_grasp_entry: f64,
}

struct EpisodeJob {
    episode_id: u32,
    label: String,
    grasp_entry: usize,
    frames: Vec<RawFrame>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    episode_id: u32,
    true_label: &'a str,
    frame_index: usize,
    distance_cm: Option<f64>,
    belief: &'a [f64],
    top_class: &'a str,
    top_prob: f64,
    decided: bool,
}

/// First frame at the minimum distance of the episode; frame 0 when the
/// episode carries no distances.
fn grasp_entry_index(frames: &[RawFrame]) -> usize {
    let mut min = f64::INFINITY;
    for f in frames {
        if let Some(d) = f.distance {
            min = min.min(d);
        }
    }
    if !min.is_finite() {
        return 0;
    }
    frames
        .iter()
        .position(|f| f.distance.map(|d| d <= min + 1e-9).unwrap_or(false))
        .unwrap_or(0)
}

fn dataset_jobs(ds: &Dataset) -> Vec<EpisodeJob> {
    let mut jobs: Vec<EpisodeJob> = Vec::new();
    for frame in &ds.frames {
        match jobs.last_mut() {
            Some(job) if job.episode_id == frame.episode_id => {
                job.frames.push(frame.frame.clone());
            }
            _ => jobs.push(EpisodeJob {
                episode_id: frame.episode_id,
                label: frame.label.clone(),
                grasp_entry: 0,
                frames: vec![frame.frame.clone()],
            }),
        }
    }
    for job in &mut jobs {
        job.grasp_entry = grasp_entry_index(&job.frames);
    }
    jobs
}

fn fresh_jobs(ds: &Dataset, dataset_dir: &Path, n: usize, seed: u64) -> Result<Vec<EpisodeJob>> {
    let gen_path = dataset_dir.join("gen_config.json");
    let gen = GenConfig::load(&gen_path)?;
    let grid = gen.grid()?;
    if grid.content_hash() != ds.grid.content_hash() {
        return Err(Error::Compatibility(
            "gen_config grid does not match the dataset grid".into(),
        ));
    }
    let profiles = make_profiles(&grid, gen.profile_seed());
    let classes = MaterialClass::all();
    let jobs = par_map(n, |t| -> Result<EpisodeJob> {
        let class = &classes[t % classes.len()];
        let params = gen.episode_params(&grid, derive_seed(seed, &[0x667265, t as u64]));
        let episode = generate_episode(class, &profiles, &params)?;
        Ok(EpisodeJob {
            episode_id: t as u32,
            label: class.label(),
            grasp_entry: episode.phase_marks.grasp,
            frames: episode.frames,
        })
    });
    jobs.into_iter().collect()
}

pub fn cmd_stream(cfg: &StreamRunConfig, out: &Path) -> Result<StreamSummary> {
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let ds = Dataset::read_dir(&cfg.dataset)?;
    let bundle = super::load_model_bundle(&cfg.model_dir, &ds)?;
    let policy = DecisionPolicy {
        kappa: cfg.kappa,
        n_max: cfg.n_max,
    };
    policy.validate_for(bundle.clf.classes.len())?;

    let jobs = match cfg.fresh_episodes {
        Some(n) => {
            if n == 0 {
                return Err(Error::Parameter("fresh_episodes must be at least 1".into()));
            }
            fresh_jobs(&ds, &cfg.dataset, n, cfg.fresh_seed)?
        }
        None => dataset_jobs(&ds),
    };
    if jobs.is_empty() {
        return Err(Error::Parameter("no episodes to stream".into()));
    }

    let traces: Vec<Result<EpisodeTrace>> = par_map(jobs.len(), |i| {
        run_episode(
            &jobs[i].frames,
            &ds.calibration,
            &bundle.nmf,
            &bundle.clf,
            &policy,
            &bundle.preprocess,
        )
    });

    let traces_path = out.join(crate::TRACES_FILE);
    let file = fs::File::create(&traces_path)
        .map_err(|e| Error::io(traces_path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::with_capacity(1 << 20, file);

    let mut correct = 0usize;
    let mut forced = 0usize;
    let mut to_decision = 0.0;
    let mut from_entry = 0.0;
    for (job, trace) in jobs.iter().zip(&traces) {
        let trace = match trace {
            Ok(t) => t,
            Err(e) => {
                return Err(Error::Training(format!(
                    "episode {}: {e}",
                    job.episode_id
                )))
            }
        };
        for r in &trace.records {
            let line = TraceLine {
                episode_id: job.episode_id,
                true_label: &job.label,
                frame_index: r.frame_index,
                distance_cm: r.distance_cm,
                belief: &r.belief,
                top_class: &r.top_class,
                top_prob: r.top_prob,
                decided: r.decided,
            };
            let json = serde_json::to_string(&line)
                .map_err(|e| Error::Parameter(format!("serialize trace: {e}")))?;
            writeln!(w, "{json}").map_err(|e| Error::io(traces_path.display().to_string(), e))?;
        }
        correct += usize::from(trace.final_label == job.label);
        forced += usize::from(trace.low_confidence);
        let consumed = trace
            .decision_frame
            .map(|f| f + 1)
            .unwrap_or(trace.records.len());
        to_decision += consumed as f64;
        let decided_at = trace.decision_frame.unwrap_or(trace.records.len() - 1);
        from_entry += decided_at.saturating_sub(job.grasp_entry) as f64;
    }
    w.flush()
        .map_err(|e| Error::io(traces_path.display().to_string(), e))?;

    let n = jobs.len();
    let summary = StreamSummary {
        schema_version: SCHEMA_VERSION,
        episodes: n,
        kappa: cfg.kappa,
        n_max: cfg.n_max,
        decision_accuracy: correct as f64 / n as f64,
        forced_decisions: forced,
        mean_frames_to_decision: to_decision / n as f64,
        mean_frames_from_grasp_entry: from_entry / n as f64,
    };
    write_json(&summary, &out.join(crate::STREAM_SUMMARY_FILE))?;
    write_json(cfg, &out.join("stream_config.json"))?;
    println!(
        "stream: {} episodes, decision accuracy {:.4}, {} forced, {:.2} frames to decision ({:.2} from grasp entry) -> {}",
        n,
        summary.decision_accuracy,
        forced,
        summary.mean_frames_to_decision,
        summary.mean_frames_from_grasp_entry,
        out.display()
    );
    Ok(summary)
}
