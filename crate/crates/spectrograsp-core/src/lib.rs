//! Streaming spectral material classification.
//!
//! The pipeline turns raw spectrometer frames into material class decisions:
//! white/dark calibration and Savitzky-Golay smoothing ([`spectra`]),
//! non-negative matrix factorization for dimensionality reduction ([`nmf`]),
//! multiclass classification with calibrated probabilities ([`classify`]),
//! and a recursive Bayes filter over frame streams ([`belief`]).
//! [`simgrasp`] generates synthetic grasp episodes for the 32-class
//! real-vs-fake fruit problem, and [`dataset`] defines the on-disk CSV
//! dataset format shared by every stage.

pub mod belief;
pub mod classify;
pub mod dataset;
pub mod error;
pub mod fmt;
pub mod nmf;
pub mod par;
pub mod pipeline;
pub mod seed;
pub mod simgrasp;
pub mod spectra;
