//! Comparison detectors: energy detection, covariance absolute value
//! (CAV) detection with and without the low-pass/downsample front end,
//! and FFT pilot energy/location detection.
//!
//! Every baseline returns the same [`Verdict`] the SCS core produces, so
//! a benchmark harness can calibrate and score all detectors through one
//! interface.

use num_complex::Complex64;

use crate::detector::{decide, TestStatistic, Verdict};
use crate::frontend::{decimate, downconvert, periodogram, FrontendConfig};
use crate::iq::IqBuffer;
use crate::normal::norm_ppf;
use crate::{Error, Result};

/// Covariance absolute value detector configuration.
#[derive(Debug, Clone)]
pub struct CavConfig {
    /// Samples consumed per decision.
    pub num_samples: usize,
    /// Smoothing factor L: autocorrelation lags 0..L−1 form the L×L
    /// Toeplitz covariance.
    pub smoothing_factor: usize,
    /// Decision threshold on T1/T2, calibrated empirically.
    pub threshold: f64,
}

impl CavConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_factor < 2 {
            return Err(Error::InvalidConfig("CAV smoothing factor must be >= 2".into()));
        }
        if self.num_samples < 10 * self.smoothing_factor {
            return Err(Error::InvalidConfig(format!(
                "CAV needs num_samples >> L: {} < 10·{}",
                self.num_samples, self.smoothing_factor
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("CAV threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Pilot detector mode: test the expected bin's power, or the argmax
/// bin's position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotMode {
    Energy,
    Location,
}

/// FFT pilot detector configuration.
#[derive(Debug, Clone)]
pub struct PilotDetectConfig {
    pub fft_size: usize,
    /// Expected pilot bin, signed (0 = DC).
    pub expected_pilot_bin: i64,
    /// Half-width of the location acceptance window, in bins.
    pub search_window: usize,
    pub mode: PilotMode,
}

impl PilotDetectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 {
            return Err(Error::InvalidConfig("pilot FFT size must be >= 2".into()));
        }
        if self.search_window < 1 {
            return Err(Error::InvalidConfig("pilot search window must be >= 1".into()));
        }
        let half = (self.fft_size / 2) as i64;
        if self.expected_pilot_bin.abs() > half {
            return Err(Error::InvalidConfig(format!(
                "expected pilot bin {} outside the FFT range ±{half}",
                self.expected_pilot_bin
            )));
        }
        Ok(())
    }
}

/// Decision criterion for the pilot detector: a precomputed threshold, or
/// a false-alarm target resolved analytically against an assumed noise
/// level (energy mode) or the uniform-argmax law (location mode).
#[derive(Debug, Clone, Copy)]
pub enum PilotCriterion {
    /// Compare the statistic against this threshold directly.
    Gamma(f64),
    /// Derive the threshold for this false-alarm target; energy mode
    /// needs the assumed per-bin noise level.
    TargetPfa { pfa: f64, assumed_noise_bin_power: f64 },
}

/// Energy detector with a central-limit threshold at the ASSUMED noise
/// power, so noise-power uncertainty hits it directly.
///
/// The statistic is mean |z|² normalized by the assumed power; the
/// threshold is 1 + Φ⁻¹(1−pfa)/√n.
pub fn energy_detect(z: &IqBuffer, assumed_noise_power: f64, pfa: f64) -> Result<Verdict> {
    if z.len() < 1000 {
        return Err(Error::InsufficientSamples { needed: 1000, got: z.len() });
    }
    if !(assumed_noise_power > 0.0) {
        return Err(Error::InvalidConfig("assumed noise power must be positive".into()));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidConfig("pfa must lie in (0,1)".into()));
    }
    let measured = z.power();
    let stat = measured / assumed_noise_power;
    let gamma = 1.0 + norm_ppf(1.0 - pfa) / (z.len() as f64).sqrt();
    decide(TestStatistic { t1: measured, t2: assumed_noise_power, t: stat }, gamma)
}

/// Unbiased complex sample autocorrelations λ_0..λ_{L−1}.
fn autocorrelations(z: &[Complex64], lags: usize) -> Vec<Complex64> {
    let n = z.len();
    (0..lags)
        .map(|l| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n - l {
                acc += z[i + l] * z[i].conj();
            }
            acc / (n - l) as f64
        })
        .collect()
}

/// CAV statistic T1/T2 over the first `num_samples` of the buffer:
/// T1 sums |c_nm| over the L×L Toeplitz autocovariance, T2 its diagonal.
pub fn cav_statistic(z: &IqBuffer, cfg: &CavConfig) -> Result<TestStatistic> {
    cfg.validate()?;
    if z.len() < cfg.num_samples {
        return Err(Error::InsufficientSamples { needed: cfg.num_samples, got: z.len() });
    }
    let l = cfg.smoothing_factor;
    let lambda = autocorrelations(&z.samples[..cfg.num_samples], l);
    let lambda0 = lambda[0].norm();
    if lambda0 == 0.0 {
        return Err(Error::DegenerateStatistic);
    }
    // (1/L)·Σ_{n,m}|λ_{|n−m|}| = |λ_0| + (2/L)·Σ_{l≥1}(L−l)|λ_l|.
    let mut off = 0.0;
    for (lag, lam) in lambda.iter().enumerate().skip(1) {
        off += (l - lag) as f64 * lam.norm();
    }
    let t1 = lambda0 + 2.0 * off / l as f64;
    Ok(TestStatistic { t1, t2: lambda0, t: t1 / lambda0 })
}

/// CAV detection against the configured threshold.
pub fn cav_detect(z: &IqBuffer, cfg: &CavConfig) -> Result<Verdict> {
    decide(cav_statistic(z, cfg)?, cfg.threshold)
}

/// CAV preceded by the SCS front end's downconversion and low-pass
/// decimation, which concentrates the pilot against far less noise.
pub fn cav_with_step2(z: &IqBuffer, cfg: &CavConfig, fe: &FrontendConfig) -> Result<Verdict> {
    let y = downconvert(z, fe.pilot_freq_hz)?;
    let d = decimate(&y, fe.decimated_rate_hz, fe.lpf_cutoff_hz)?;
    cav_detect(&d, cfg)
}

fn signed_to_bin(signed: i64, n: usize) -> usize {
    if signed >= 0 {
        signed as usize
    } else {
        (n as i64 + signed) as usize
    }
}

fn circular_bin_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Upper tail of the mean of `shape` iid exponentials with unit mean:
/// P(mean > x) for the Gamma(shape, 1/shape) law, via the Poisson sum.
fn gamma_mean_tail(shape: usize, x: f64) -> f64 {
    // P(Gamma(k, θ=1) > kx) = e^{−kx} Σ_{j<k} (kx)^j / j!
    let kx = shape as f64 * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for j in 1..shape {
        term *= kx / j as f64;
        sum += term;
    }
    ((-kx).exp() * sum).min(1.0)
}

fn energy_mode_threshold(pfa: f64, assumed_bin_power: f64, dwells: usize) -> f64 {
    // Bisection on the exact tail of the normalized dwell-average.
    let mut lo = 1.0;
    let mut hi = 64.0;
    while gamma_mean_tail(dwells, hi) > pfa {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_mean_tail(dwells, mid) > pfa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assumed_bin_power * 0.5 * (lo + hi)
}

fn location_mode_threshold(pfa: f64, cfg: &PilotDetectConfig, dwells: usize) -> f64 {
    // Smallest hit count m with P(Binomial(dwells, p_hit) >= m) <= pfa,
    // assuming a uniform argmax over the FFT under H0.
    let p_hit = (2 * cfg.search_window + 1) as f64 / cfg.fft_size as f64;
    let mut tail = 1.0 - (1.0 - p_hit).powi(dwells as i32);
    let mut pmf_geq = tail;
    let mut m = 1usize;
    while m <= dwells && pmf_geq > pfa {
        m += 1;
        // P(X >= m) recomputed directly.
        tail = 0.0;
        let mut coeff = 1.0f64;
        for j in 0..m {
            if j > 0 {
                coeff *= (dwells - j + 1) as f64 / j as f64;
            }
            tail += coeff * p_hit.powi(j as i32) * (1.0 - p_hit).powi((dwells - j) as i32);
        }
        pmf_geq = 1.0 - tail;
    }
    m as f64 - 0.5
}

/// FFT pilot detection.
///
/// Energy mode averages the expected bin's periodogram power across
/// dwells and compares it with a threshold. Location mode counts the
/// dwells whose argmax bin falls within `search_window` of the expected
/// bin and compares the count with a calibrated vote threshold. The
/// location rule is a reconstruction of the published method; only its
/// false-alarm target is pinned.
pub fn pilot_detect(
    z: &IqBuffer,
    cfg: &PilotDetectConfig,
    criterion: PilotCriterion,
) -> Result<Verdict> {
    cfg.validate()?;
    let n = cfg.fft_size;
    if z.len() < n {
        return Err(Error::InsufficientSamples { needed: n, got: z.len() });
    }
    let dwells = z.len() / n;
    let expected = signed_to_bin(cfg.expected_pilot_bin, n);

    let mut bin_power_acc = 0.0;
    let mut hits = 0usize;
    for tau in 0..dwells {
        let pg = periodogram(&z.samples[tau * n..(tau + 1) * n]);
        bin_power_acc += pg[expected];
        let argmax = pg
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if circular_bin_distance(argmax, expected, n) <= cfg.search_window {
            hits += 1;
        }
    }

    match cfg.mode {
        PilotMode::Energy => {
            let stat = bin_power_acc / dwells as f64;
            let gamma = match criterion {
                PilotCriterion::Gamma(g) => g,
                PilotCriterion::TargetPfa { pfa, assumed_noise_bin_power } => {
                    if !(pfa > 0.0 && pfa < 1.0) || !(assumed_noise_bin_power > 0.0) {
                        return Err(Error::InvalidConfig("bad pilot pfa parameters".into()));
                    }
                    energy_mode_threshold(pfa, assumed_noise_bin_power, dwells)
                }
            };
            decide(TestStatistic { t1: stat, t2: 1.0, t: stat }, gamma)
        }
        PilotMode::Location => {
            let stat = hits as f64;
            let gamma = match criterion {
                PilotCriterion::Gamma(g) => g,
                PilotCriterion::TargetPfa { pfa, .. } => {
                    if !(pfa > 0.0 && pfa < 1.0) {
                        return Err(Error::InvalidConfig("bad pilot pfa".into()));
                    }
                    location_mode_threshold(pfa, cfg, dwells)
                }
            };
            decide(TestStatistic { t1: stat, t2: 1.0, t: stat }, gamma)
        }
    }
}
