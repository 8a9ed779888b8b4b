//! Error taxonomy shared by all pipeline stages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix shapes do not conform.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violates a precondition (empty input, bad window, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input values outside the mathematical domain (negative, non-finite).
    #[error("domain error: {0}")]
    Domain(String),

    /// Calibration leaves no usable channel.
    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    /// Observation likelihood is identically zero; the belief is unchanged.
    #[error("degenerate observation: likelihood is zero for every class")]
    DegenerateObservation,

    /// Training cannot proceed (e.g. a single class in the data).
    #[error("training error: {0}")]
    Training(String),

    /// Stratified splitting is impossible with the requested fold count.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// Two artifacts disagree on a shared contract (wavelength grid, k, ...).
    #[error("incompatible artifacts: {0}")]
    Compatibility(String),

    /// Malformed dataset or model file.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A component error annotated with the stream frame it occurred on.
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_frame(self, frame: usize) -> Self {
        Error::AtFrame {
            frame,
            source: Box::new(self),
        }
    }
}
