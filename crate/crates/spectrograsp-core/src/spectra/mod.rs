//! Spectral data model and reflectance preprocessing.
//!
//! A dataset shares one [`WavelengthGrid`]; every [`RawFrame`] holds one
//! detector count per grid channel. [`calibrate`] turns counts into
//! reflectance relative to a white standard, [`savgol_smooth`] removes
//! high-frequency noise, and [`scan_average`] averages repeated reads.

mod savgol;

pub use savgol::{savgol_smooth, savgol_weights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt;

/// Number of detector channels on the reference instrument.
pub const DEFAULT_CHANNELS: usize = 2048;
/// Spectral range of the reference instrument, nanometers.
pub const GRID_MIN_NM: f64 = 350.0;
pub const GRID_MAX_NM: f64 = 1150.0;
/// Reflectance is clamped to `[0, R_MAX]`; specular glints can exceed the
/// white standard and the clamp bounds downstream numerics.
pub const R_MAX: f64 = 2.0;
/// A channel is usable when `white - dark > EPS_CAL_REL * max(white)`.
pub const EPS_CAL_REL: f64 = 1e-6;
/// Wavelength (nm) separating the visible band from the near-infrared band.
pub const NIR_CUTOFF_NM: f64 = 700.0;

/// Strictly increasing wavelengths (nm) shared by all frames of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    values: Vec<f64>,
}

impl WavelengthGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Parameter(format!(
                "wavelength grid needs at least 2 channels, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite wavelength".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// The instrument default: 2048 channels spanning 350-1150 nm inclusive.
    pub fn default_vnir() -> Self {
        let n = DEFAULT_CHANNELS;
        let step = (GRID_MAX_NM - GRID_MIN_NM) / (n - 1) as f64;
        let values = (0..n).map(|i| GRID_MIN_NM + step * i as f64).collect();
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// FNV-1a over the serialized grid (the exact `grid.csv` bytes). Used to
    /// reject model/dataset pairs built on different grids.
    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            bytes.extend_from_slice(fmt::sig9(*v).as_bytes());
            bytes.push(b'\n');
        }
        fmt::fnv1a64(&bytes)
    }

    /// Channel indices whose wavelength satisfies the predicate, in order.
    pub fn channels_where(&self, pred: impl Fn(f64) -> bool) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &w)| pred(w))
            .map(|(i, _)| i)
            .collect()
    }

    /// Restrict the grid to the given channel indices (must be increasing).
    pub fn subset(&self, channels: &[usize]) -> Result<Self> {
        let values = channels
            .iter()
            .map(|&c| {
                self.values
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::Dimension(format!("channel {c} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// One full detector read: counts per channel plus acquisition metadata.
/// `distance` is the gripper-finger-to-object distance in centimeters; it is
/// present in simulated data and may be absent in external data.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub counts: Vec<f64>,
    pub timestamp: f64,
    pub distance: Option<f64>,
}

impl RawFrame {
    pub fn new(counts: Vec<f64>, timestamp: f64, distance: Option<f64>) -> Result<Self> {
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Domain(
                "frame counts must be finite and nonnegative".into(),
            ));
        }
        if let Some(d) = distance {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Domain(format!("invalid distance {d}")));
            }
        }
        Ok(Self {
            counts,
            timestamp,
            distance,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// White-reference / dark-baseline calibration measurements.
///
/// `valid_mask[i]` is true iff `white[i] - dark[i]` exceeds
/// `EPS_CAL_REL * max(white)`; channels where the lamp delivers no energy
/// are masked rather than producing huge ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPair {
    white: Vec<f64>,
    dark: Vec<f64>,
    valid_mask: Vec<bool>,
}

impl CalibrationPair {
    pub fn new(white: Vec<f64>, dark: Vec<f64>) -> Result<Self> {
        if white.len() != dark.len() {
            return Err(Error::Dimension(format!(
                "white has {} channels, dark has {}",
                white.len(),
                dark.len()
            )));
        }
        if white.iter().chain(dark.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite calibration counts".into()));
        }
        let max_white = white.iter().cloned().fold(0.0_f64, f64::max);
        let eps = EPS_CAL_REL * max_white;
        let valid_mask: Vec<bool> = white
            .iter()
            .zip(&dark)
            .map(|(&w, &d)| w - d > eps)
            .collect();
        for (i, valid) in valid_mask.iter().enumerate() {
            if *valid && !(white[i] >= dark[i] && dark[i] >= 0.0) {
                return Err(Error::Domain(format!(
                    "channel {i}: require white >= dark >= 0, got white={} dark={}",
                    white[i], dark[i]
                )));
            }
        }
        Ok(Self {
            white,
            dark,
            valid_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.white.len()
    }

    pub fn is_empty(&self) -> bool {
        self.white.is_empty()
    }

    pub fn white(&self) -> &[f64] {
        &self.white
    }

    pub fn dark(&self) -> &[f64] {
        &self.dark
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid_mask
    }

    pub fn num_valid(&self) -> usize {
        self.valid_mask.iter().filter(|v| **v).count()
    }
}

/// Unitless reflectance relative to the white standard, one value per
/// channel. Invalid channels carry 0 and are excluded from downstream fits.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceCurve {
    pub values: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

impl ReflectanceCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-channel reflectance `(raw - dark) / (white - dark)` on valid channels,
/// clamped to `[0, R_MAX]`. Invalid channels are set to 0.
pub fn calibrate(raw: &RawFrame, cal: &CalibrationPair) -> Result<ReflectanceCurve> {
    if raw.len() != cal.len() {
        return Err(Error::Dimension(format!(
            "frame has {} channels, calibration has {}",
            raw.len(),
            cal.len()
        )));
    }
    if cal.num_valid() == 0 {
        return Err(Error::DegenerateCalibration(
            "no channel has white - dark above threshold".into(),
        ));
    }
    let values = raw
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if cal.valid_mask[i] {
                let r = (c - cal.dark[i]) / (cal.white[i] - cal.dark[i]);
                r.clamp(0.0, R_MAX)
            } else {
                0.0
            }
        })
        .collect();
    Ok(ReflectanceCurve {
        values,
        valid_mask: cal.valid_mask.clone(),
    })
}

/// Channel-wise arithmetic mean of repeated reads. The timestamp is the mean
/// timestamp; the distance is the mean distance when all frames carry one.
pub fn scan_average(frames: &[RawFrame]) -> Result<RawFrame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Parameter("scan_average needs at least one frame".into()))?;
    let c = first.len();
    if frames.iter().any(|f| f.len() != c) {
        return Err(Error::Dimension(
            "frames passed to scan_average differ in channel count".into(),
        ));
    }
    let n = frames.len() as f64;
    let mut counts = vec![0.0; c];
    for f in frames {
        for (acc, v) in counts.iter_mut().zip(&f.counts) {
            *acc += v;
        }
    }
    for acc in counts.iter_mut() {
        *acc /= n;
    }
    let timestamp = frames.iter().map(|f| f.timestamp).sum::<f64>() / n;
    let distance = if frames.iter().all(|f| f.distance.is_some()) {
        Some(frames.iter().map(|f| f.distance.unwrap()).sum::<f64>() / n)
    } else {
        None
    };
    RawFrame::new(counts, timestamp, distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lamp(n: usize) -> (Vec<f64>, Vec<f64>) {
        let white: Vec<f64> = (0..n).map(|i| 3000.0 + 40.0 * (i % 17) as f64).collect();
        let dark: Vec<f64> = (0..n).map(|i| 60.0 + 0.5 * (i % 5) as f64).collect();
        (white, dark)
    }

    #[test]
    fn calibrate_white_gives_one() {
        let (white, dark) = lamp(64);
        let cal = CalibrationPair::new(white.clone(), dark).unwrap();
        let raw = RawFrame::new(white, 0.0, None).unwrap();
        let r = calibrate(&raw, &cal).unwrap();
        for (i, v) in r.values.iter().enumerate() {
            assert!(r.valid_mask[i]);
            assert!((v - 1.0).abs() < 1e-12, "channel {i}: {v}");
        }
    }

    #[test]
    fn calibrate_dark_gives_zero() {
        let (white, dark) = lamp(64);
        let cal = CalibrationPair::new(white, dark.clone()).unwrap();
        let raw = RawFrame::new(dark, 0.0, None).unwrap();
        let r = calibrate(&raw, &cal).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn calibrate_midpoint_is_exactly_half() {
        let (white, dark) = lamp(64);
        let mid: Vec<f64> = white
            .iter()
            .zip(&dark)
            .map(|(&w, &d)| d + 0.5 * (w - d))
            .collect();
        let cal = CalibrationPair::new(white, dark).unwrap();
        let raw = RawFrame::new(mid, 0.0, None).unwrap();
        let r = calibrate(&raw, &cal).unwrap();
        for v in &r.values {
            assert!((v - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn calibrate_rejects_length_mismatch() {
        let (white, dark) = lamp(64);
        let cal = CalibrationPair::new(white, dark).unwrap();
        let raw = RawFrame::new(vec![1.0; 63], 0.0, None).unwrap();
        assert!(matches!(calibrate(&raw, &cal), Err(Error::Dimension(_))));
    }

    #[test]
    fn calibrate_rejects_fully_masked_calibration() {
        // white == dark on every channel: nothing usable.
        let white = vec![100.0; 16];
        let dark = vec![100.0; 16];
        let cal = CalibrationPair::new(white, dark).unwrap();
        assert_eq!(cal.num_valid(), 0);
        let raw = RawFrame::new(vec![50.0; 16], 0.0, None).unwrap();
        assert!(matches!(
            calibrate(&raw, &cal),
            Err(Error::DegenerateCalibration(_))
        ));
    }

    #[test]
    fn calibrate_clamps_and_masks() {
        // Channel 0 is dead (white == dark), channel 1 glints above white,
        // channel 2 reads below dark.
        let white = vec![100.0, 1000.0, 1000.0];
        let dark = vec![100.0, 100.0, 100.0];
        let cal = CalibrationPair::new(white, dark).unwrap();
        let raw = RawFrame::new(vec![5000.0, 5000.0, 0.0], 0.0, None).unwrap();
        let r = calibrate(&raw, &cal).unwrap();
        assert_eq!(r.values[0], 0.0);
        assert_eq!(r.values[1], R_MAX);
        assert_eq!(r.values[2], 0.0);
        assert!(!r.valid_mask[0] && r.valid_mask[1] && r.valid_mask[2]);
    }

    #[test]
    fn scan_average_identity_and_mean() {
        let f = RawFrame::new(vec![1.0, 2.0, 3.0], 0.5, Some(4.0)).unwrap();
        let avg = scan_average(std::slice::from_ref(&f)).unwrap();
        assert_eq!(avg, f);

        let g = RawFrame::new(vec![3.0, 6.0, 9.0], 1.5, Some(8.0)).unwrap();
        let avg = scan_average(&[f.clone(), g]).unwrap();
        assert_eq!(avg.counts, vec![2.0, 4.0, 6.0]);
        assert_eq!(avg.timestamp, 1.0);
        assert_eq!(avg.distance, Some(6.0));

        let h = RawFrame::new(vec![3.0, 6.0, 9.0], 1.5, None).unwrap();
        let avg = scan_average(&[f, h]).unwrap();
        assert_eq!(avg.distance, None, "any absent distance clears the mean");
    }

    #[test]
    fn scan_average_rejects_empty() {
        assert!(matches!(scan_average(&[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn scan_average_noise_reduction_is_sqrt_n() {
        // 64 averaged frames of constant signal + N(0, sigma) noise should
        // leave residual noise of about sigma/8. Empirical over 1000 seeded
        // trials, +/-20%.
        use rand::Rng;
        use rand_distr::{Distribution, Normal};
        let sigma = 0.5;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = crate::seed::stream_rng(7, &[0]);
        let mut devs = Vec::new();
        for _ in 0..1000 {
            let frames: Vec<RawFrame> = (0..64)
                .map(|_| {
                    let counts = (0..8)
                        .map(|_| f64::max(100.0 + normal.sample(&mut rng), 0.0))
                        .collect();
                    RawFrame::new(counts, rng.gen::<f64>(), None).unwrap()
                })
                .collect();
            let avg = scan_average(&frames).unwrap();
            for c in avg.counts {
                devs.push(c - 100.0);
            }
        }
        let var = devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64;
        let expected = sigma / 8.0;
        let observed = var.sqrt();
        assert!(
            (observed - expected).abs() < 0.2 * expected,
            "observed {observed}, expected about {expected}"
        );
    }

    #[test]
    fn grid_default_shape() {
        let g = WavelengthGrid::default_vnir();
        assert_eq!(g.len(), DEFAULT_CHANNELS);
        assert_eq!(g.values()[0], GRID_MIN_NM);
        assert_eq!(g.values()[DEFAULT_CHANNELS - 1], GRID_MAX_NM);
    }

    #[test]
    fn grid_rejects_non_increasing() {
        assert!(WavelengthGrid::new(vec![350.0, 350.0]).is_err());
        assert!(WavelengthGrid::new(vec![400.0, 350.0]).is_err());
        assert!(WavelengthGrid::new(vec![350.0]).is_err());
    }

    #[test]
    fn grid_hash_tracks_content() {
        let a = WavelengthGrid::new(vec![350.0, 351.0, 352.0]).unwrap();
        let b = WavelengthGrid::new(vec![350.0, 351.0, 352.0]).unwrap();
        let c = WavelengthGrid::new(vec![350.0, 351.0, 353.0]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn grid_hash_is_fnv1a_of_serialized_lines() {
        // Independent re-derivation of the hash contract.
        let g = WavelengthGrid::new(vec![350.0, 700.0, 1150.0]).unwrap();
        let serial = "3.50000000e2\n7.00000000e2\n1.15000000e3\n";
        let mut h: u64 = 0xcbf29ce484222325;
        for b in serial.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        assert_eq!(g.content_hash(), h);
    }

    proptest! {
        // calibrate(dark + t*(white - dark)) == t for t in [0, R_MAX].
        #[test]
        fn calibrate_is_affine(t in 0.0..=R_MAX) {
            let (white, dark) = lamp(32);
            let mixed: Vec<f64> = white.iter().zip(&dark)
                .map(|(&w, &d)| d + t * (w - d))
                .collect();
            let cal = CalibrationPair::new(white, dark).unwrap();
            let raw = RawFrame::new(mixed, 0.0, None).unwrap();
            let r = calibrate(&raw, &cal).unwrap();
            for v in &r.values {
                prop_assert!((v - t).abs() < 1e-9);
            }
        }

        // Averaging is invariant under input permutation (up to rounding).
        #[test]
        fn scan_average_permutation_invariant(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut rng = crate::seed::stream_rng(seed, &[1]);
            let frames: Vec<RawFrame> = (0..7)
                .map(|i| {
                    let counts = (0..5).map(|j| ((i * 5 + j) as f64).sin().abs() * 10.0).collect();
                    RawFrame::new(counts, i as f64, Some(1.0 + i as f64)).unwrap()
                })
                .collect();
            let mut shuffled = frames.clone();
            shuffled.shuffle(&mut rng);
            let a = scan_average(&frames).unwrap();
            let b = scan_average(&shuffled).unwrap();
            for (x, y) in a.counts.iter().zip(&b.counts) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.timestamp - b.timestamp).abs() < 1e-12);
        }
    }
}
