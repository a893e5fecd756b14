//! Synthetic primary signals, calibrated noise, and SNR-controlled mixing.
//!
//! The primary model is a pilot tone carrying a fraction `f_p` of the total
//! power plus a pseudo-random data component shaped flat across the channel
//! bandwidth `B`. Noise is circularly-symmetric white Gaussian whose
//! realized power is redrawn per call from a uniform-in-dB uncertainty law.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fft;
use crate::iq::{check_compatible, IqBuffer, Origin};
use crate::{Error, Result};

/// Pilot + flat-spectrum primary signal model.
///
/// The channel occupies `[0, signal_bandwidth_hz]` at baseband with the
/// pilot tone at `pilot_offset_hz` inside it; `carrier_freq_hz` is the
/// absolute pilot frequency a front end downconverts by.
#[derive(Debug, Clone)]
pub struct SignalModel {
    /// Total signal power P_S in watts.
    pub total_power: f64,
    /// Fraction of total power carried by the pilot tone, in (0, 1).
    pub pilot_fraction: f64,
    /// Pilot position within the channel, Hz from the lower channel edge.
    pub pilot_offset_hz: f64,
    /// Channel bandwidth B in Hz.
    pub signal_bandwidth_hz: f64,
    /// Pilot frequency used for downconversion (the channel sits at
    /// `[0, B]` at baseband, so this equals `pilot_offset_hz`).
    pub carrier_freq_hz: f64,
}

impl SignalModel {
    /// ATSC-like defaults: pilot 310 kHz above the lower channel edge of a
    /// 6 MHz channel, carrying 5% of the total power. The pilot fraction is
    /// a modeling choice, not a measured ATSC constant.
    pub fn atsc_like(total_power: f64) -> Self {
        Self {
            total_power,
            pilot_fraction: 0.05,
            pilot_offset_hz: 310_000.0,
            signal_bandwidth_hz: 6.0e6,
            carrier_freq_hz: 310_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pilot_fraction > 0.0 && self.pilot_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "pilot fraction must lie in (0,1), got {}",
                self.pilot_fraction
            )));
        }
        if !(self.signal_bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig("signal bandwidth must be positive".into()));
        }
        if !(self.total_power > 0.0) {
            return Err(Error::InvalidConfig("total power must be positive".into()));
        }
        if !(self.pilot_offset_hz >= 0.0 && self.pilot_offset_hz <= self.signal_bandwidth_hz) {
            return Err(Error::InvalidConfig(format!(
                "pilot offset {} Hz outside the channel [0, {}] Hz",
                self.pilot_offset_hz, self.signal_bandwidth_hz
            )));
        }
        Ok(())
    }

    /// Pilot power f_p · P_S.
    pub fn pilot_power(&self) -> f64 {
        self.pilot_fraction * self.total_power
    }

    /// Data-spectrum power (1 − f_p) · P_S.
    pub fn data_power(&self) -> f64 {
        (1.0 - self.pilot_fraction) * self.total_power
    }
}

/// White Gaussian noise with uniform-in-dB power uncertainty.
///
/// The realized power of one call is `nominal · 10^(u/10)` with
/// `u ~ U(−ρ, ρ)` dB; ρ = 0 reproduces the nominal exactly.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    /// Nominal noise power σ_o² in watts (per-sample variance).
    pub nominal_power: f64,
    /// Uncertainty half-width ρ in dB, ≥ 0.
    pub uncertainty_rho_db: f64,
}

impl NoiseModel {
    pub fn new(nominal_power: f64, uncertainty_rho_db: f64) -> Result<Self> {
        if !(nominal_power > 0.0) {
            return Err(Error::InvalidConfig("noise power must be positive".into()));
        }
        if !(uncertainty_rho_db >= 0.0) {
            return Err(Error::InvalidConfig("noise uncertainty rho must be >= 0 dB".into()));
        }
        Ok(Self { nominal_power, uncertainty_rho_db })
    }

    /// Draws the realized power for one trial.
    pub fn realize(&self, rng: &mut impl Rng) -> f64 {
        if self.uncertainty_rho_db == 0.0 {
            return self.nominal_power;
        }
        let u: f64 = rng.gen_range(-self.uncertainty_rho_db..=self.uncertainty_rho_db);
        self.nominal_power * 10f64.powf(u / 10.0)
    }
}

/// Optional channel impairments, off by default. Mirrors the degradations
/// seen on captured signals: a static carrier frequency offset and a
/// single-echo multipath tap.
#[derive(Debug, Clone, Default)]
pub struct Impairments {
    /// Carrier frequency offset in Hz applied to the whole signal.
    pub cfo_hz: f64,
    /// Single echo: (delay in seconds, linear amplitude relative to the
    /// direct path).
    pub echo: Option<(f64, f64)>,
}

fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian(rng: &mut impl Rng, power: f64) -> Complex64 {
    // Circularly symmetric: each component carries half the power.
    let s = (power * 0.5).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Generates the pilot component alone: a complex exponential at the pilot
/// offset with power f_p·P_S and a seed-determined initial phase.
pub fn generate_pilot(model: &SignalModel, n: usize, rate: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = rng_from_seed(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let phase0: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let amp = model.pilot_power().sqrt();
    let turns_per_sample = model.pilot_offset_hz / rate;
    (0..n)
        .map(|i| {
            let turns = exact_fract(i as f64, turns_per_sample);
            let theta = std::f64::consts::TAU * turns + phase0;
            Complex64::from_polar(amp, theta)
        })
        .collect()
}

/// Fractional part of `a * b` computed with an FMA product split, so the
/// phase of long tones does not lose precision as the index grows.
pub(crate) fn exact_fract(a: f64, b: f64) -> f64 {
    let p = a * b;
    let err = a.mul_add(b, -p);
    let f = (p - p.floor()) + err;
    f - f.floor()
}

/// Generates a synthetic primary: pilot tone plus band-limited data shaped
/// flat over `[0, B]`, with total measured power exactly `P_S`.
///
/// Deterministic per `(model, duration, rate, seed)`. Rejects `rate < B`
/// (the channel would alias) and non-positive durations.
pub fn generate_primary(
    model: &SignalModel,
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<IqBuffer> {
    model.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidConfig("duration must be positive".into()));
    }
    if rate < model.signal_bandwidth_hz {
        return Err(Error::InvalidConfig(format!(
            "sample rate {} Hz cannot represent bandwidth {} Hz",
            rate, model.signal_bandwidth_hz
        )));
    }
    let n = (duration * rate).round() as usize;
    if n < 1 {
        return Err(Error::InvalidConfig("duration * rate must be >= 1 sample".into()));
    }

    let pilot = generate_pilot(model, n, rate, seed);
    let data = generate_flat_data(model, n, rate, seed);

    let samples: Vec<Complex64> = pilot.iter().zip(data.iter()).map(|(p, d)| p + d).collect();
    IqBuffer::new(samples, rate, Origin::Synthetic)
}

/// Flat-spectrum data component over `[0, B]`, normalized so its measured
/// power is exactly `(1 − f_p)·P_S`.
fn generate_flat_data(model: &SignalModel, n: usize, rate: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = rng_from_seed(seed ^ 0x5bf0_3635_dcd6_6d43);
    let m = n.next_power_of_two().max(2);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    let bin_hz = rate / m as f64;
    let mut occupied = 0usize;
    for (idx, slot) in spec.iter_mut().enumerate() {
        let f = idx as f64 * bin_hz;
        if f <= model.signal_bandwidth_hz {
            *slot = complex_gaussian(&mut rng, 1.0);
            occupied += 1;
        }
    }
    if occupied == 0 {
        spec[0] = complex_gaussian(&mut rng, 1.0);
    }
    fft::ifft_in_place(&mut spec);
    spec.truncate(n);

    let measured: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    let target = model.data_power();
    let scale = if measured > 0.0 { (target / measured).sqrt() } else { 0.0 };
    spec.iter_mut().for_each(|z| *z *= scale);
    spec
}

/// Applies optional impairments to a generated signal.
pub fn apply_impairments(buf: &IqBuffer, imp: &Impairments) -> IqBuffer {
    let mut out = buf.clone();
    if imp.cfo_hz != 0.0 {
        let turns_per_sample = imp.cfo_hz / buf.sample_rate;
        for (i, z) in out.samples.iter_mut().enumerate() {
            let turns = exact_fract(i as f64, turns_per_sample);
            *z *= Complex64::from_polar(1.0, std::f64::consts::TAU * turns);
        }
    }
    if let Some((delay_s, amp)) = imp.echo {
        let d = (delay_s * buf.sample_rate).round() as usize;
        if d >= 1 && d < out.samples.len() {
            let direct = out.samples.clone();
            for i in d..out.samples.len() {
                out.samples[i] += amp * direct[i - d];
            }
        }
    }
    out
}

/// Generates `n` samples of circularly-symmetric complex white Gaussian
/// noise at the per-call realized power. Deterministic per seed.
pub fn generate_noise(model: &NoiseModel, n: usize, rate: f64, seed: u64) -> Result<IqBuffer> {
    if n < 1 {
        return Err(Error::InvalidConfig("noise sample count must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let realized = model.realize(&mut rng);
    let samples: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, realized)).collect();
    IqBuffer::new(samples, rate, Origin::Synthetic)
}

/// Scales `signal` so its measured power over the nominal noise power
/// equals `snr_db`, then adds the buffers. The ratio is taken against the
/// NOMINAL noise power, never the per-trial realization, so noise-power
/// uncertainty degrades detectors that assume the nominal value.
///
/// `snr_db = -inf` is the H0 sentinel: the output is exactly the noise
/// buffer and the signal is never touched.
pub fn mix(
    signal: &IqBuffer,
    noise: &IqBuffer,
    snr_db: f64,
    nominal_noise_power: f64,
) -> Result<IqBuffer> {
    if snr_db == f64::NEG_INFINITY {
        return Ok(noise.clone());
    }
    check_compatible(signal, noise)?;
    if !(nominal_noise_power > 0.0) {
        return Err(Error::InvalidConfig("nominal noise power must be positive".into()));
    }
    let target = 10f64.powf(snr_db / 10.0) * nominal_noise_power;
    let measured = signal.power();
    if measured == 0.0 {
        return Err(Error::InvalidConfig("cannot scale an all-zero signal".into()));
    }
    let scale = (target / measured).sqrt();
    let samples: Vec<Complex64> = signal
        .samples
        .iter()
        .zip(noise.samples.iter())
        .map(|(s, w)| scale * s + w)
        .collect();
    IqBuffer::new(samples, signal.sample_rate, Origin::Synthetic)
}
