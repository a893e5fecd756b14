//! Raw IQ recording ingestion.
//!
//! Data files hold interleaved little-endian 32-bit float I/Q pairs. A
//! sidecar header (plain `key = value` text) declares the sample rate,
//! center frequency, and a free-form description:
//!
//! ```text
//! sample_rate_hz = 21520000.0
//! center_freq_hz = 615000000.0
//! description = channel 38 capture
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::iq::{IqBuffer, Origin};
use crate::{Error, Result};

/// Parsed sidecar header for a raw IQ capture.
#[derive(Debug, Clone, PartialEq)]
pub struct IqHeader {
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
    pub description: String,
}

impl IqHeader {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sample_rate_hz = None;
        let mut center_freq_hz = None;
        let mut description = String::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedFile(format!("header line without '=': {line}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "sample_rate_hz" => {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::MalformedFile(format!("bad sample_rate_hz: {value}"))
                    })?;
                    sample_rate_hz = Some(v);
                }
                "center_freq_hz" => {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::MalformedFile(format!("bad center_freq_hz: {value}"))
                    })?;
                    center_freq_hz = Some(v);
                }
                "description" => description = value.to_string(),
                _ => {} // unknown keys are ignored for forward compatibility
            }
        }
        let sample_rate_hz = sample_rate_hz
            .ok_or_else(|| Error::MalformedFile("header missing sample_rate_hz".into()))?;
        if !(sample_rate_hz > 0.0) {
            return Err(Error::MalformedFile("sample_rate_hz must be positive".into()));
        }
        Ok(Self {
            sample_rate_hz,
            center_freq_hz: center_freq_hz.unwrap_or(0.0),
            description,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "sample_rate_hz = {}\ncenter_freq_hz = {}\ndescription = {}\n",
            self.sample_rate_hz, self.center_freq_hz, self.description
        )
    }
}

/// Loads interleaved little-endian f32 I/Q pairs; length = file bytes / 8.
///
/// Rejects truncated files (byte counts not divisible into I/Q pairs) and
/// empty captures.
pub fn load_iq_file(path: &Path, header: &IqHeader) -> Result<IqBuffer> {
    let bytes = fs::read(path)?;
    decode_iq_bytes(&bytes, header)
}

/// Decodes an in-memory byte image of an IQ file.
pub fn decode_iq_bytes(bytes: &[u8], header: &IqHeader) -> Result<IqBuffer> {
    if bytes.is_empty() {
        return Err(Error::MalformedFile("zero-length IQ file".into()));
    }
    if bytes.len() % 8 != 0 {
        return Err(Error::MalformedFile(format!(
            "truncated IQ file: {} bytes is not a whole number of float32 I/Q pairs",
            bytes.len()
        )));
    }
    let samples: Vec<Complex64> = bytes
        .chunks_exact(8)
        .map(|c| {
            let i = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let q = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(i, q)
        })
        .collect();
    IqBuffer::new(samples, header.sample_rate_hz, Origin::File)
}

/// Writes a buffer in the same interleaved f32 format (test/tooling aid).
pub fn encode_iq_bytes(buf: &IqBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(buf.len() * 8);
    for z in &buf.samples {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    out
}
