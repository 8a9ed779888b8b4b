//! On-disk dataset format shared by every pipeline stage.
//!
//! A dataset is a directory containing:
//! - `grid.csv` — one wavelength (nm) per line;
//! - `frames.csv` — header `episode_id,label,frame_index,timestamp_s,distance_cm,c0,...`;
//! - `calibration.csv` — header `wavelength_nm,white,dark`.
//!
//! Floats are serialized with 9 significant digits; `distance_cm` is the
//! empty string when absent.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::spectra::{CalibrationPair, RawFrame, WavelengthGrid};

pub const GRID_FILE: &str = "grid.csv";
pub const FRAMES_FILE: &str = "frames.csv";
pub const CALIBRATION_FILE: &str = "calibration.csv";

/// One raw frame plus its episode bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFrame {
    pub episode_id: u32,
    pub label: String,
    pub frame_index: u32,
    pub frame: RawFrame,
}

/// A full dataset: the shared wavelength grid, the calibration pair the
/// frames were collected under, and the frames in file order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub grid: WavelengthGrid,
    pub calibration: CalibrationPair,
    pub frames: Vec<DatasetFrame>,
}

impl Dataset {
    pub fn new(
        grid: WavelengthGrid,
        calibration: CalibrationPair,
        frames: Vec<DatasetFrame>,
    ) -> Result<Self> {
        let c = grid.len();
        if calibration.len() != c {
            return Err(Error::Dimension(format!(
                "calibration has {} channels, grid has {c}",
                calibration.len()
            )));
        }
        for f in &frames {
            if f.frame.len() != c {
                return Err(Error::Dimension(format!(
                    "episode {} frame {} has {} channels, grid has {c}",
                    f.episode_id,
                    f.frame_index,
                    f.frame.len()
                )));
            }
        }
        Ok(Self {
            grid,
            calibration,
            frames,
        })
    }

    /// Unique episode ids in first-appearance order.
    pub fn episode_ids(&self) -> Vec<u32> {
        let mut seen = Vec::new();
        for f in &self.frames {
            if seen.last() != Some(&f.episode_id) && !seen.contains(&f.episode_id) {
                seen.push(f.episode_id);
            }
        }
        seen
    }

    /// Label of each episode, keyed by `episode_ids()` order.
    pub fn episode_labels(&self) -> Vec<(u32, String)> {
        let mut out: Vec<(u32, String)> = Vec::new();
        for f in &self.frames {
            if !out.iter().any(|(id, _)| *id == f.episode_id) {
                out.push((f.episode_id, f.label.clone()));
            }
        }
        out
    }

    /// Sorted unique labels.
    pub fn label_set(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.frames.iter().map(|f| f.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

        let grid_path = dir.join(GRID_FILE);
        let mut out = String::with_capacity(self.grid.len() * 16);
        for w in self.grid.values() {
            out.push_str(&sig9(*w));
            out.push('\n');
        }
        fs::write(&grid_path, out).map_err(|e| Error::io(grid_path.display().to_string(), e))?;

        let cal_path = dir.join(CALIBRATION_FILE);
        let file =
            fs::File::create(&cal_path).map_err(|e| Error::io(cal_path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::io(cal_path.display().to_string(), e);
        writeln!(w, "wavelength_nm,white,dark").map_err(io_err)?;
        for i in 0..self.grid.len() {
            writeln!(
                w,
                "{},{},{}",
                sig9(self.grid.values()[i]),
                sig9(self.calibration.white()[i]),
                sig9(self.calibration.dark()[i])
            )
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;

        let frames_path = dir.join(FRAMES_FILE);
        let file = fs::File::create(&frames_path)
            .map_err(|e| Error::io(frames_path.display().to_string(), e))?;
        let mut w = BufWriter::with_capacity(1 << 20, file);
        let io_err = |e| Error::io(frames_path.display().to_string(), e);
        let mut header = String::from("episode_id,label,frame_index,timestamp_s,distance_cm");
        for c in 0..self.grid.len() {
            let _ = write!(header, ",c{c}");
        }
        writeln!(w, "{header}").map_err(io_err)?;
        let mut row = String::with_capacity(self.grid.len() * 16 + 64);
        for f in &self.frames {
            if f.label.contains(',') || f.label.contains('\n') {
                return Err(Error::Parameter(format!(
                    "label {:?} contains a CSV delimiter",
                    f.label
                )));
            }
            row.clear();
            let _ = write!(row, "{},{},{},", f.episode_id, f.label, f.frame_index);
            row.push_str(&sig9(f.frame.timestamp));
            row.push(',');
            if let Some(d) = f.frame.distance {
                row.push_str(&sig9(d));
            }
            for v in &f.frame.counts {
                row.push(',');
                row.push_str(&sig9(*v));
            }
            writeln!(w, "{row}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let grid_path = dir.join(GRID_FILE);
        let text = fs::read_to_string(&grid_path)
            .map_err(|e| Error::io(grid_path.display().to_string(), e))?;
        let mut wavelengths = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            wavelengths.push(parse_float(line.trim(), &grid_path, lineno + 1)?);
        }
        let grid = WavelengthGrid::new(wavelengths)?;

        let cal_path = dir.join(CALIBRATION_FILE);
        let file =
            fs::File::open(&cal_path).map_err(|e| Error::io(cal_path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut white = Vec::with_capacity(grid.len());
        let mut dark = Vec::with_capacity(grid.len());
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(cal_path.display().to_string(), e))?;
            if lineno == 0 {
                expect_header(&line, "wavelength_nm,white,dark", &cal_path)?;
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(parse_err(&cal_path, lineno + 1, "expected 3 columns"));
            }
            let wl = parse_float(parts[0], &cal_path, lineno + 1)?;
            let expected = grid.values()[white.len()];
            if wl != expected {
                return Err(parse_err(
                    &cal_path,
                    lineno + 1,
                    &format!("wavelength {wl} does not match grid value {expected}"),
                ));
            }
            white.push(parse_float(parts[1], &cal_path, lineno + 1)?);
            dark.push(parse_float(parts[2], &cal_path, lineno + 1)?);
        }
        let calibration = CalibrationPair::new(white, dark)?;

        let frames_path = dir.join(FRAMES_FILE);
        let file = fs::File::open(&frames_path)
            .map_err(|e| Error::io(frames_path.display().to_string(), e))?;
        let reader = BufReader::with_capacity(1 << 20, file);
        let c = grid.len();
        let mut frames = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(frames_path.display().to_string(), e))?;
            if lineno == 0 {
                // Validate the fixed prefix; the channel columns are implied
                // by the grid length.
                if !line.starts_with("episode_id,label,frame_index,timestamp_s,distance_cm") {
                    return Err(parse_err(&frames_path, 1, "unexpected frames.csv header"));
                }
                continue;
            }
            let row = lineno + 1;
            let mut parts = line.split(',');
            let episode_id: u32 = parts
                .next()
                .ok_or_else(|| parse_err(&frames_path, row, "missing episode_id"))?
                .parse()
                .map_err(|_| parse_err(&frames_path, row, "bad episode_id"))?;
            let label = parts
                .next()
                .ok_or_else(|| parse_err(&frames_path, row, "missing label"))?
                .to_string();
            let frame_index: u32 = parts
                .next()
                .ok_or_else(|| parse_err(&frames_path, row, "missing frame_index"))?
                .parse()
                .map_err(|_| parse_err(&frames_path, row, "bad frame_index"))?;
            let timestamp = parse_float(
                parts
                    .next()
                    .ok_or_else(|| parse_err(&frames_path, row, "missing timestamp_s"))?,
                &frames_path,
                row,
            )?;
            let dist_str = parts
                .next()
                .ok_or_else(|| parse_err(&frames_path, row, "missing distance_cm"))?;
            let distance = if dist_str.is_empty() {
                None
            } else {
                Some(parse_float(dist_str, &frames_path, row)?)
            };
            let mut counts = Vec::with_capacity(c);
            for p in parts {
                counts.push(parse_float(p, &frames_path, row)?);
            }
            if counts.len() != c {
                return Err(parse_err(
                    &frames_path,
                    row,
                    &format!("expected {c} channel columns, got {}", counts.len()),
                ));
            }
            let frame = RawFrame::new(counts, timestamp, distance)?;
            frames.push(DatasetFrame {
                episode_id,
                label,
                frame_index,
                frame,
            });
        }
        Dataset::new(grid, calibration, frames)
    }
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    }
}

fn parse_float(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| parse_err(path, line, &format!("bad float {s:?}")))
}

fn expect_header(line: &str, expected: &str, path: &Path) -> Result<()> {
    if line.trim() != expected {
        return Err(parse_err(
            path,
            1,
            &format!("expected header {expected:?}, got {line:?}"),
        ));
    }
    Ok(())
}
