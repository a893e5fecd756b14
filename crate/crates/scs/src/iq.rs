//! Complex baseband sample buffers.

use num_complex::Complex64;

use crate::{Error, Result};

/// Where a buffer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Produced by the synthetic signal lab.
    Synthetic,
    /// Read from a captured IQ recording.
    File,
}

/// A complex baseband sample sequence with its sample rate.
///
/// Amplitudes are in volts across a 1 Ω reference, so `|z|²` is power in
/// watts and [`IqBuffer::power`] is the mean sample power.
#[derive(Debug, Clone)]
pub struct IqBuffer {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub origin: Origin,
}

impl IqBuffer {
    /// Builds a buffer, enforcing the non-empty / positive-rate invariants.
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, origin: Origin) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("IqBuffer must not be empty".into()));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self { samples, sample_rate, origin })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Buffer duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean sample power `(1/n) Σ |z(n)|²` in watts.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Checks that two buffers can be combined sample by sample.
pub(crate) fn check_compatible(a: &IqBuffer, b: &IqBuffer) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::BufferMismatch(format!(
            "lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.sample_rate != b.sample_rate {
        return Err(Error::BufferMismatch(format!(
            "sample rates differ: {} Hz vs {} Hz",
            a.sample_rate, b.sample_rate
        )));
    }
    Ok(())
}
