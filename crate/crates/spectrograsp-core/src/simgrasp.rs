//! Synthetic spectral generator and grasp-episode simulator.
//!
//! Reproduces the structure of the 32-class real/fake fruit experiment:
//! 16 fruit pairs whose members share the visible band exactly and diverge
//! only in the near-infrared, a grasp that closes from `d_start` to
//! `d_grasp` and holds, and an inverse / inverse-square gain model that
//! makes the NIR signature dominate as the fingers approach the object.
//! Everything is a pure function of the seed, so datasets regenerate
//! byte-identically.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetFrame};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::seed::{derive_seed, stream_rng};
use crate::spectra::{CalibrationPair, RawFrame, WavelengthGrid, NIR_CUTOFF_NM};

pub const NUM_FRUITS: usize = 16;
pub const NUM_CLASSES: usize = 32;

/// The 16 fruit varieties; each appears as a real/fake pair.
pub const FRUITS: [&str; NUM_FRUITS] = [
    "kiwi",
    "banana",
    "green_grape",
    "lemon",
    "mango",
    "avocado",
    "plum",
    "orange",
    "red_apple",
    "pear",
    "strawberry",
    "red_grape",
    "black_grape",
    "green_apple",
    "peach",
    "lime",
];

/// Visible gain `a / (1 + d)`.
const VIS_GAIN: f64 = 1.4;
/// NIR gain `b / (1 + d)^2` with `b = 4a`, which puts the count-space
/// crossover where the NIR overtakes the visible signal at d = 3 cm.
const NIR_GAIN: f64 = 4.0 * VIS_GAIN;
/// Object band energy as a fraction of the total lamp energy, per unit gain.
/// Sized so that frames at the start distance are dominated by the ambient
/// signature (the far-range reading is mostly the overhead LEDs) while the
/// close-range signal stands well clear of it.
const BAND_ENERGY_FRACTION: f64 = 0.07;
/// The NIR signature ramps in over this wavelength range so that smoothing
/// cannot leak pair differences below the visible/NIR cut.
const NIR_RAMP_START_NM: f64 = 710.0;
const NIR_RAMP_END_NM: f64 = 740.0;
/// Minimum relative L2 distance between the NIR signatures of a pair.
const PAIR_NIR_SEPARATION: f64 = 0.3;
/// At least one shared NIR bump must differ in amplitude by this factor.
const PAIR_BUMP_RATIO: f64 = 1.5;

const GEN_CONFIG_FILE: &str = "gen_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Authenticity {
    Real,
    Fake,
}

/// One of the 32 material classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaterialClass {
    pub fruit: &'static str,
    pub authenticity: Authenticity,
    pub class_index: usize,
}

impl MaterialClass {
    pub fn all() -> Vec<MaterialClass> {
        let mut out = Vec::with_capacity(NUM_CLASSES);
        for (fi, fruit) in FRUITS.iter().enumerate() {
            for (ai, authenticity) in [Authenticity::Real, Authenticity::Fake]
                .into_iter()
                .enumerate()
            {
                out.push(MaterialClass {
                    fruit,
                    authenticity,
                    class_index: fi * 2 + ai,
                });
            }
        }
        out
    }

    pub fn label(&self) -> String {
        let a = match self.authenticity {
            Authenticity::Real => "real",
            Authenticity::Fake => "fake",
        };
        format!("{}_{a}", self.fruit)
    }

    pub fn from_label(label: &str) -> Result<MaterialClass> {
        MaterialClass::all()
            .into_iter()
            .find(|c| c.label() == label)
            .ok_or_else(|| Error::Parameter(format!("unknown material label {label:?}")))
    }

    /// Index of the fruit, shared by both members of a pair.
    pub fn pair_id(&self) -> usize {
        self.class_index / 2
    }

    /// The other member of this fruit's real/fake pair.
    pub fn pair_partner(&self) -> MaterialClass {
        let all = MaterialClass::all();
        all[self.class_index ^ 1]
    }
}

/// Per-class emission profile in detector-count units. `visible` is zero at
/// and above the NIR ramp; `nir` is zero below it. Both members of a pair
/// share `visible` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    pub class_index: usize,
    pub pair_id: usize,
    pub visible: Vec<f64>,
    pub nir: Vec<f64>,
}

/// Simulation knobs for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeParams {
    pub frame_rate: f64,
    pub n_frames: usize,
    pub d_start: f64,
    pub d_grasp: f64,
    pub snr: f64,
    pub gel_attenuation: f64,
    /// Per-episode signal coupling varies by up to this fraction (grasp pose
    /// changes the optical coupling between probe and object).
    pub coupling_jitter: f64,
    /// Hold-phase signal jitter from fiber flex while the object is lifted.
    pub flex_jitter: f64,
    /// Overhead-LED signature in count units, fixed across the dataset.
    pub ambient_profile: Vec<f64>,
    pub seed: u64,
}

impl EpisodeParams {
    pub fn for_grid(grid: &WavelengthGrid, seed: u64) -> Self {
        Self {
            frame_rate: 10.0,
            n_frames: 65,
            d_start: 8.5,
            d_grasp: 1.0,
            snr: 1000.0,
            gel_attenuation: 0.93,
            coupling_jitter: 0.1,
            flex_jitter: 0.02,
            ambient_profile: ambient_profile(grid),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::Parameter("n_frames must be at least 2".into()));
        }
        if !(self.d_grasp < self.d_start) || self.d_grasp < 0.0 {
            return Err(Error::Parameter(format!(
                "need 0 <= d_grasp < d_start, got {} and {}",
                self.d_grasp, self.d_start
            )));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Parameter("snr must be positive".into()));
        }
        if !(0.0 < self.gel_attenuation && self.gel_attenuation <= 1.0) {
            return Err(Error::Parameter("gel_attenuation must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Frame indices marking phase transitions within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseMarks {
    /// First frame (the episode starts at PRE-GRASP distance).
    pub pre_grasp: usize,
    /// First frame at grasp distance.
    pub grasp: usize,
}

#[derive(Debug, Clone)]
pub struct GraspEpisode {
    pub frames: Vec<RawFrame>,
    pub label: MaterialClass,
    pub phase_marks: PhaseMarks,
}

/// Quartz-tungsten-halogen lamp white reference, count units.
pub fn lamp_white(grid: &WavelengthGrid) -> Vec<f64> {
    grid.values()
        .iter()
        .map(|&w| 1200.0 + 2800.0 * (-((w - 780.0) / 260.0).powi(2)).exp())
        .collect()
}

/// Dark baseline: the probe covering blocks all light.
pub fn lamp_dark(grid: &WavelengthGrid) -> Vec<f64> {
    vec![0.0; grid.len()]
}

fn gaussian(w: f64, center: f64, sigma: f64) -> f64 {
    (-(w - center) * (w - center) / (2.0 * sigma * sigma)).exp()
}

/// Overhead-LED signature: blue peak plus a broad phosphor hump, visible
/// band only, in count units.
pub fn ambient_profile(grid: &WavelengthGrid) -> Vec<f64> {
    let white = lamp_white(grid);
    grid.values()
        .iter()
        .zip(&white)
        .map(|(&w, &wh)| {
            let r = 0.45 * gaussian(w, 450.0, 20.0) + 0.375 * gaussian(w, 560.0, 60.0) + 0.03;
            r * wh
        })
        .collect()
}

/// Smoothstep ramp masking the NIR signature to zero below the cut.
fn nir_ramp(w: f64) -> f64 {
    if w <= NIR_RAMP_START_NM {
        0.0
    } else if w >= NIR_RAMP_END_NM {
        1.0
    } else {
        let t = (w - NIR_RAMP_START_NM) / (NIR_RAMP_END_NM - NIR_RAMP_START_NM);
        t * t * (3.0 - 2.0 * t)
    }
}

/// Sum of `n` Gaussian bumps drawn from the atom pool, scaled to the target
/// count-unit total.
fn bump_combo(
    grid: &WavelengthGrid,
    white: &[f64],
    atoms: &[(f64, f64)],
    amps: &[f64],
    band_mask: impl Fn(f64) -> f64,
    target_sum: f64,
) -> Vec<f64> {
    let mut profile: Vec<f64> = grid
        .values()
        .iter()
        .zip(white)
        .map(|(&w, &wh)| {
            let shape: f64 = atoms
                .iter()
                .zip(amps)
                .map(|(&(c, s), &a)| a * gaussian(w, c, s))
                .sum();
            shape * band_mask(w) * wh
        })
        .collect();
    let sum: f64 = profile.iter().sum();
    if sum > 0.0 {
        let scale = target_sum / sum;
        for v in profile.iter_mut() {
            *v *= scale;
        }
    }
    profile
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

fn draw_amps(rng: &mut ChaCha8Rng, pool: usize, n_active: usize) -> Vec<f64> {
    let mut amps = vec![0.0; pool];
    let mut chosen: Vec<usize> = (0..pool).collect();
    for k in 0..n_active {
        let pick = rng.gen_range(k..pool);
        chosen.swap(k, pick);
    }
    for &i in &chosen[..n_active] {
        amps[i] = rng.gen_range(0.3..1.0);
    }
    amps
}

/// Generate the 32 class profiles. Pair members share the visible band
/// bitwise; their NIR signatures come from distinct combinations over a
/// shared bump pool and are rejection-sampled until they are at least
/// `PAIR_NIR_SEPARATION` apart (relative L2) with one bump differing in
/// amplitude by `PAIR_BUMP_RATIO`.
pub fn make_profiles(grid: &WavelengthGrid, seed: u64) -> Vec<ClassProfile> {
    let white = lamp_white(grid);
    let lamp_total: f64 = white.iter().sum();
    let band_sum = BAND_ENERGY_FRACTION * lamp_total;
    let mut rng = stream_rng(seed, &[0x70726f66]);

    // Shared atom pools keep the whole corpus in a low-dimensional cone,
    // which is what makes a small NMF basis effective.
    let vis_atoms: Vec<(f64, f64)> = (0..8)
        .map(|_| (rng.gen_range(380.0..650.0), rng.gen_range(25.0..90.0)))
        .collect();
    let nir_atoms: Vec<(f64, f64)> = (0..8)
        .map(|_| (rng.gen_range(750.0..1110.0), rng.gen_range(20.0..80.0)))
        .collect();

    let vis_mask = |w: f64| if w < NIR_CUTOFF_NM { 1.0 } else { 0.0 };

    let mut profiles = Vec::with_capacity(NUM_CLASSES);
    for pair in 0..NUM_FRUITS {
        let n_vis = rng.gen_range(3..=6);
        let vis_amps = draw_amps(&mut rng, vis_atoms.len(), n_vis);
        let visible = bump_combo(grid, &white, &vis_atoms, &vis_amps, vis_mask, band_sum);

        let n_nir = rng.gen_range(3..=6);
        let real_amps = draw_amps(&mut rng, nir_atoms.len(), n_nir);
        let real_nir = bump_combo(grid, &white, &nir_atoms, &real_amps, nir_ramp, band_sum);

        // Resample the fake member until it is far enough from the real one.
        let fake_nir = loop {
            let n_fake = rng.gen_range(3..=6);
            let fake_amps = draw_amps(&mut rng, nir_atoms.len(), n_fake);
            let candidate = bump_combo(grid, &white, &nir_atoms, &fake_amps, nir_ramp, band_sum);
            let ratio_ok = real_amps.iter().zip(&fake_amps).any(|(&r, &f)| {
                let (lo, hi) = if r < f { (r, f) } else { (f, r) };
                lo > 0.0 && hi / lo >= PAIR_BUMP_RATIO || (lo == 0.0 && hi > 0.0)
            });
            if relative_l2(&real_nir, &candidate) >= PAIR_NIR_SEPARATION && ratio_ok {
                break candidate;
            }
        };

        profiles.push(ClassProfile {
            class_index: pair * 2,
            pair_id: pair,
            visible: visible.clone(),
            nir: real_nir,
        });
        profiles.push(ClassProfile {
            class_index: pair * 2 + 1,
            pair_id: pair,
            visible,
            nir: fake_nir,
        });
    }
    profiles
}

pub fn g_vis(distance: f64) -> f64 {
    VIS_GAIN / (1.0 + distance)
}

pub fn g_nir(distance: f64) -> f64 {
    NIR_GAIN / (1.0 + distance) / (1.0 + distance)
}

fn render(
    profile: &ClassProfile,
    distance: f64,
    amplitude: f64,
    timestamp: f64,
    params: &EpisodeParams,
    rng: &mut ChaCha8Rng,
) -> Result<RawFrame> {
    if !(params.d_grasp..=params.d_start).contains(&distance) {
        return Err(Error::Parameter(format!(
            "distance {distance} outside [{}, {}]",
            params.d_grasp, params.d_start
        )));
    }
    let gv = g_vis(distance) * amplitude;
    let gn = g_nir(distance) * amplitude;
    let mut counts: Vec<f64> = params
        .ambient_profile
        .iter()
        .zip(profile.visible.iter().zip(&profile.nir))
        .map(|(&amb, (&v, &n))| params.gel_attenuation * (amb + gv * v + gn * n))
        .collect();
    if params.snr.is_finite() {
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let noise = Normal::new(0.0, mean / params.snr)
            .map_err(|e| Error::Parameter(format!("noise model: {e}")))?;
        for c in counts.iter_mut() {
            *c = (*c + noise.sample(rng)).max(0.0);
        }
    }
    RawFrame::new(counts, timestamp, Some(distance))
}

/// Render a single frame at the given distance (unit coupling, zero
/// timestamp). Set `params.snr` to infinity for a noise-free frame.
pub fn render_frame(
    profile: &ClassProfile,
    distance: f64,
    params: &EpisodeParams,
    rng: &mut ChaCha8Rng,
) -> Result<RawFrame> {
    render(profile, distance, 1.0, 0.0, params, rng)
}

/// Ambient-only frame (empty gripper): class-independent by construction.
pub fn render_ambient_frame(params: &EpisodeParams, rng: &mut ChaCha8Rng) -> Result<RawFrame> {
    let mut counts: Vec<f64> = params
        .ambient_profile
        .iter()
        .map(|&amb| params.gel_attenuation * amb)
        .collect();
    if params.snr.is_finite() {
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let noise = Normal::new(0.0, mean / params.snr)
            .map_err(|e| Error::Parameter(format!("noise model: {e}")))?;
        for c in counts.iter_mut() {
            *c = (*c + noise.sample(rng)).max(0.0);
        }
    }
    RawFrame::new(counts, 0.0, None)
}

/// Simulate one grasp: the fingers close from `d_start` to `d_graps` over
/// the first 60% of frames, then hold at grasp distance while the object is
/// lifted (small flex jitter on the signal). Deterministic per `params.seed`.
pub fn generate_episode(
    class: &MaterialClass,
    profiles: &[ClassProfile],
    params: &EpisodeParams,
) -> Result<GraspEpisode> {
    params.validate()?;
    let profile = profiles
        .iter()
        .find(|p| p.class_index == class.class_index)
        .ok_or_else(|| Error::Parameter(format!("no profile for class {}", class.class_index)))?;
    let mut rng = stream_rng(params.seed, &[0x657069, class.class_index as u64]);
    let coupling = 1.0 + params.coupling_jitter * (2.0 * rng.gen::<f64>() - 1.0);

    let n = params.n_frames;
    let n_close = ((0.6 * n as f64).round() as usize).clamp(2, n);
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let distance = if i < n_close {
            let t = i as f64 / (n_close - 1) as f64;
            params.d_start + (params.d_grasp - params.d_start) * t
        } else {
            params.d_grasp
        };
        let amp = if i < n_close {
            coupling
        } else {
            coupling * (1.0 + params.flex_jitter * (2.0 * rng.gen::<f64>() - 1.0))
        };
        let timestamp = i as f64 / params.frame_rate;
        frames.push(render(profile, distance, amp, timestamp, params, &mut rng)?);
    }
    Ok(GraspEpisode {
        frames,
        label: *class,
        phase_marks: PhaseMarks {
            pre_grasp: 0,
            grasp: n_close - 1,
        },
    })
}

/// Generator configuration persisted as `gen_config.json` for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub schema_version: u32,
    pub episodes_per_class: usize,
    pub seed: u64,
    pub channels: usize,
    pub frame_rate: f64,
    pub n_frames: usize,
    pub d_start: f64,
    pub d_grasp: f64,
    pub snr: f64,
    pub gel_attenuation: f64,
    pub coupling_jitter: f64,
    pub flex_jitter: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            schema_version: 1,
            episodes_per_class: 5,
            seed: 42,
            channels: crate::spectra::DEFAULT_CHANNELS,
            frame_rate: 10.0,
            n_frames: 65,
            d_start: 8.5,
            d_grasp: 1.0,
            snr: 1000.0,
            gel_attenuation: 0.93,
            coupling_jitter: 0.1,
            flex_jitter: 0.02,
        }
    }
}

impl GenConfig {
    pub fn grid(&self) -> Result<WavelengthGrid> {
        if self.channels == crate::spectra::DEFAULT_CHANNELS {
            return Ok(WavelengthGrid::default_vnir());
        }
        let n = self.channels;
        if n < 2 {
            return Err(Error::Parameter("need at least 2 channels".into()));
        }
        let step = (crate::spectra::GRID_MAX_NM - crate::spectra::GRID_MIN_NM) / (n - 1) as f64;
        WavelengthGrid::new(
            (0..n)
                .map(|i| crate::spectra::GRID_MIN_NM + step * i as f64)
                .collect(),
        )
    }

    pub fn episode_params(&self, grid: &WavelengthGrid, episode_seed: u64) -> EpisodeParams {
        EpisodeParams {
            frame_rate: self.frame_rate,
            n_frames: self.n_frames,
            d_start: self.d_start,
            d_grasp: self.d_grasp,
            snr: self.snr,
            gel_attenuation: self.gel_attenuation,
            coupling_jitter: self.coupling_jitter,
            flex_jitter: self.flex_jitter,
            ambient_profile: ambient_profile(grid),
            seed: episode_seed,
        }
    }

    /// Seed for the profile generator, derived so the profiles are
    /// reproducible from this config alone.
    pub fn profile_seed(&self) -> u64 {
        derive_seed(self.seed, &[0x70726f66696c65])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub classes: usize,
    pub episodes: usize,
    pub frames: usize,
}

/// Generate the full dataset directory: `episodes_per_class` grasps of each
/// of the 32 classes, plus grid, calibration, and provenance files. Episode
/// generation is parallel; every episode derives its RNG stream from
/// `(seed, class_index, episode_index)` so output is schedule-independent.
pub fn generate_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<DatasetSummary> {
    if cfg.episodes_per_class == 0 {
        return Err(Error::Parameter("episodes_per_class must be at least 1".into()));
    }
    let grid = cfg.grid()?;
    let profiles = make_profiles(&grid, cfg.profile_seed());
    let classes = MaterialClass::all();
    let epc = cfg.episodes_per_class;

    let episodes = par_map(NUM_CLASSES * epc, |unit| -> Result<(u32, GraspEpisode)> {
        let class_idx = unit / epc;
        let ep_idx = unit % epc;
        let episode_seed = derive_seed(cfg.seed, &[class_idx as u64, ep_idx as u64]);
        let params = cfg.episode_params(&grid, episode_seed);
        let episode = generate_episode(&classes[class_idx], &profiles, &params)?;
        Ok((unit as u32, episode))
    });

    let mut frames = Vec::with_capacity(NUM_CLASSES * epc * cfg.n_frames);
    for entry in episodes {
        let (episode_id, episode) = entry?;
        let label = episode.label.label();
        for (fi, frame) in episode.frames.into_iter().enumerate() {
            frames.push(DatasetFrame {
                episode_id,
                label: label.clone(),
                frame_index: fi as u32,
                frame,
            });
        }
    }

    let calibration = CalibrationPair::new(lamp_white(&grid), lamp_dark(&grid))?;
    let n_frames = frames.len();
    let dataset = Dataset::new(grid, calibration, frames)?;
    dataset.write_dir(out_dir)?;

    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Parameter(format!("serialize gen config: {e}")))?;
    let cfg_path = out_dir.join(GEN_CONFIG_FILE);
    fs::write(&cfg_path, json).map_err(|e| Error::io(cfg_path.display().to_string(), e))?;

    Ok(DatasetSummary {
        classes: NUM_CLASSES,
        episodes: NUM_CLASSES * epc,
        frames: n_frames,
    })
}
