//! `report`: emit the CSV data bundles behind the figures — per-class mean
//! reflectance curves, real/fake pair overlays, the gel on/off overlay, the
//! accuracy-vs-k curve, and belief-vs-frame trajectories. No rendering.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use spectrograsp_core::dataset::Dataset;
use spectrograsp_core::error::{Error, Result};
use spectrograsp_core::fmt::sig9;
use spectrograsp_core::pipeline::{preprocess_dataset, PreprocessConfig};
use spectrograsp_core::seed::stream_rng;
use spectrograsp_core::simgrasp::{lamp_white, make_profiles, render_frame, GenConfig};

use crate::config::{write_json, ReportRunConfig};
use crate::csv_quote;

pub fn cmd_report(cfg: &ReportRunConfig, out: &Path) -> Result<()> {
    // Collect every missing input before failing.
    let mut missing = Vec::new();
    for f in ["grid.csv", "frames.csv", "calibration.csv", "gen_config.json"] {
        let p = cfg.dataset.join(f);
        if !p.exists() {
            missing.push(p.display().to_string());
        }
    }
    if let Some(train_dir) = &cfg.train_dir {
        let p = train_dir.join(crate::K_SWEEP_FILE);
        if !p.exists() {
            missing.push(p.display().to_string());
        }
    }
    if let Some(stream_dir) = &cfg.stream_dir {
        let p = stream_dir.join(crate::TRACES_FILE);
        if !p.exists() {
            missing.push(p.display().to_string());
        }
    }
    if !missing.is_empty() {
        return Err(Error::Parameter(format!(
            "missing report inputs: {}",
            missing.join(", ")
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;

    let ds = Dataset::read_dir(&cfg.dataset)?;
    let gen = GenConfig::load(&cfg.dataset.join("gen_config.json"))?;

    // Per-class mean reflectance curves (one row per class).
    let pre = PreprocessConfig {
        savgol_window: cfg.savgol_window,
        savgol_degree: cfg.savgol_degree,
    };
    let sm = preprocess_dataset(&ds, &pre)?;
    let classes = ds.label_set();
    let c = ds.grid.len();
    let mut mean_csv = String::from("label");
    for w in ds.grid.values() {
        let _ = write!(mean_csv, ",{}", sig9(*w));
    }
    mean_csv.push('\n');
    for label in &classes {
        let rows: Vec<usize> = (0..sm.num_samples())
            .filter(|&i| &sm.labels[i] == label)
            .collect();
        let mut mean = vec![0.0; c];
        for &r in &rows {
            for (m, v) in mean.iter_mut().zip(sm.rows.row(r)) {
                *m += v;
            }
        }
        let _ = write!(mean_csv, "{}", csv_quote(label));
        for m in &mean {
            let _ = write!(mean_csv, ",{}", sig9(m / rows.len().max(1) as f64));
        }
        mean_csv.push('\n');
    }
    let mean_path = out.join("mean_curves.csv");
    fs::write(&mean_path, mean_csv).map_err(|e| Error::io(mean_path.display().to_string(), e))?;

    // Real/fake pair overlays from the regenerated noise-free profiles, in
    // reflectance units: the visible-band columns of a pair are identical by
    // construction.
    let profiles = make_profiles(&ds.grid, gen.profile_seed());
    let white = lamp_white(&ds.grid);
    let all = spectrograsp_core::simgrasp::MaterialClass::all();
    let mut overlay = String::from("wavelength_nm");
    for class in &all {
        let _ = write!(overlay, ",{}", class.label());
    }
    overlay.push('\n');
    for ch in 0..c {
        let _ = write!(overlay, "{}", sig9(ds.grid.values()[ch]));
        for class in &all {
            let p = &profiles[class.class_index];
            let refl = (p.visible[ch] + p.nir[ch]) / white[ch];
            let _ = write!(overlay, ",{}", sig9(refl));
        }
        overlay.push('\n');
    }
    let overlay_path = out.join("pair_overlays.csv");
    fs::write(&overlay_path, overlay)
        .map_err(|e| Error::io(overlay_path.display().to_string(), e))?;

    // Gel on/off overlay at grasp distance, noise on.
    let params_gel = gen.episode_params(&ds.grid, 0);
    let mut params_clear = params_gel.clone();
    params_clear.gel_attenuation = 1.0;
    let mut rng_a = stream_rng(gen.seed, &[0x67656c, 0]);
    let mut rng_b = stream_rng(gen.seed, &[0x67656c, 1]);
    let with_gel = render_frame(&profiles[0], gen.d_grasp, &params_gel, &mut rng_a)?;
    let without = render_frame(&profiles[0], gen.d_grasp, &params_clear, &mut rng_b)?;
    let mut gel_csv = String::from("wavelength_nm,counts_gel,counts_clear,ratio\n");
    for ch in 0..c {
        let ratio = with_gel.counts[ch] / without.counts[ch].max(1e-300);
        let _ = writeln!(
            gel_csv,
            "{},{},{},{}",
            sig9(ds.grid.values()[ch]),
            sig9(with_gel.counts[ch]),
            sig9(without.counts[ch]),
            sig9(ratio)
        );
    }
    let gel_path = out.join("gel_overlay.csv");
    fs::write(&gel_path, gel_csv).map_err(|e| Error::io(gel_path.display().to_string(), e))?;

    // Accuracy-vs-k curve: copied from the training run when provided.
    if let Some(train_dir) = &cfg.train_dir {
        let src = train_dir.join(crate::K_SWEEP_FILE);
        let dst = out.join("accuracy_vs_k.csv");
        fs::copy(&src, &dst).map_err(|e| Error::io(src.display().to_string(), e))?;
    }

    // Belief trajectories: flattened from the stream traces when provided.
    if let Some(stream_dir) = &cfg.stream_dir {
        let src = stream_dir.join(crate::TRACES_FILE);
        let file = fs::File::open(&src).map_err(|e| Error::io(src.display().to_string(), e))?;
        let mut csv =
            String::from("episode_id,true_label,frame_index,distance_cm,top_class,top_prob,decided\n");
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(src.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: src.display().to_string(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            let dist = v["distance_cm"]
                .as_f64()
                .map(sig9)
                .unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{dist},{},{},{}",
                v["episode_id"],
                csv_quote(v["true_label"].as_str().unwrap_or("")),
                v["frame_index"],
                csv_quote(v["top_class"].as_str().unwrap_or("")),
                v["top_prob"],
                v["decided"]
            );
        }
        let traj_path = out.join("belief_trajectories.csv");
        fs::write(&traj_path, csv).map_err(|e| Error::io(traj_path.display().to_string(), e))?;
    }

    write_json(cfg, &out.join("report_config.json"))?;
    println!("report: plot data written -> {}", out.display());
    Ok(())
}
