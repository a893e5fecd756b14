//! Spectrum sensing for TV white space: spectral covariance sensing (SCS)
//! with a synthetic signal lab, DSP front end, closed-form detection
//! statistics, and the usual comparison detectors.
//!
//! The crate is organized along the processing chain:
//!
//! - [`signal`]: synthetic pilot+flat primaries, calibrated AWGN with
//!   noise-power uncertainty, SNR-controlled mixing.
//! - [`io`]: raw interleaved float32 IQ file ingestion with a sidecar header.
//! - [`frontend`]: downconversion, low-pass decimation, and the partial
//!   spectrogram matrix.
//! - [`detector`]: spectrogram covariance, the T = T1/T2 test statistic,
//!   decisions, and empirical threshold calibration.
//! - [`analytic`]: closed-form moments, the decision threshold, predicted
//!   false-alarm/detection probabilities, and correlation estimation.
//! - [`baselines`]: energy detection, covariance absolute value (CAV)
//!   detection, and FFT pilot energy/location detection.
//!
//! All operations are pure given their configuration and seed; nothing in
//! the crate holds shared mutable state, so every function may be called
//! concurrently.

pub mod analytic;
pub mod baselines;
pub mod detector;
pub mod frontend;
pub mod io;
pub mod iq;
pub mod normal;
pub mod signal;

mod fft;

pub use iq::{IqBuffer, Origin};

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An input buffer is shorter than the operation requires.
    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Two buffers that must agree in length or sample rate do not.
    #[error("buffer mismatch: {0}")]
    BufferMismatch(String),

    /// The requested decimation ratio is not an integer.
    #[error("non-integer decimation factor: input rate {input_rate} Hz / output rate {output_rate} Hz")]
    NonIntegerDecimation { input_rate: f64, output_rate: f64 },

    /// The spectrogram was constant, so T2 = 0 and T = T1/T2 is undefined.
    #[error("degenerate test statistic: T2 = 0 (constant spectrogram)")]
    DegenerateStatistic,

    /// The threshold formula's denominator is not positive.
    #[error("threshold undefined: Q^-1(1-pfa) + 2*sqrt(K*Nd) = {denominator} <= 0")]
    DegenerateThreshold { denominator: f64 },

    /// IQ file framing or header violation.
    #[error("malformed IQ data: {0}")]
    MalformedFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
