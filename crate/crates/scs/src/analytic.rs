//! Closed-form statistical model of the SCS detector: moments of the
//! covariance entries and of T1/T2, the analytical decision threshold,
//! predicted false-alarm and detection probabilities, the effective SNR,
//! and correlation-profile estimation from simulated spectrograms.
//!
//! Conventions. `noise_psd` (N_w) is the nominal in-band spectrum level of
//! one spectrogram bin; for a shaped (filtered) band the operational value
//! is the square root of the mean autocovariance, which reduces to the
//! flat-band PSD when the band is truly flat. Correlation profiles index
//! dwell lag directly: `alpha(l)` is the normalized correlation between
//! dwells l apart, with `alpha(0) = 1` by construction. The accumulated
//! correlation sums over the N_d(N_d−1)/2 dwell pairs,
//! A = Σ_{l=1}^{N_d−1} (N_d−l)·α(l), which for lag-independent α equals
//! α·N_d(N_d−1)/2.

use crate::detector::covariance;
use crate::frontend::Spectrogram;
use crate::normal::{norm_cdf, norm_ppf};
use crate::{Error, Result};

/// Nominal spectral levels and geometry for the three-region band model
/// (noise-only bins, the pilot bin, and data bins).
#[derive(Debug, Clone)]
pub struct SpectralParams {
    /// Nominal noise spectrum level N_w per selected bin.
    pub noise_psd: f64,
    /// Nominal data-spectrum level N_s = (1−f_p)·P_S/B.
    pub signal_psd: f64,
    /// Nominal pilot level δ_p = f_p·P_S·N/F_s.
    pub pilot_psd: f64,
    /// Half-width K of the selected bin range.
    pub half_bins: usize,
    /// Number of dwells N_d.
    pub num_dwells: usize,
}

impl SpectralParams {
    pub fn new(
        noise_psd: f64,
        signal_psd: f64,
        pilot_psd: f64,
        half_bins: usize,
        num_dwells: usize,
    ) -> Result<Self> {
        if noise_psd < 0.0 || signal_psd < 0.0 || pilot_psd < 0.0 {
            return Err(Error::InvalidConfig("spectral levels must be nonnegative".into()));
        }
        if half_bins < 1 || num_dwells < 2 {
            return Err(Error::InvalidConfig("need K >= 1 and N_d >= 2".into()));
        }
        Ok(Self { noise_psd, signal_psd, pilot_psd, half_bins, num_dwells })
    }

    /// Derives the pilot and data levels from the scenario quantities:
    /// δ_p = f_p·P_S·N/F_s and N_s = (1−f_p)·P_S/B.
    #[allow(clippy::too_many_arguments)]
    pub fn from_scenario(
        noise_psd: f64,
        pilot_fraction: f64,
        total_power: f64,
        bandwidth_hz: f64,
        fft_size: usize,
        decimated_rate_hz: f64,
        half_bins: usize,
        num_dwells: usize,
    ) -> Result<Self> {
        let pilot_psd = pilot_fraction * total_power * fft_size as f64 / decimated_rate_hz;
        let signal_psd = (1.0 - pilot_fraction) * total_power / bandwidth_hz;
        Self::new(noise_psd, signal_psd, pilot_psd, half_bins, num_dwells)
    }

    fn k(&self) -> f64 {
        self.half_bins as f64
    }

    fn nd(&self) -> f64 {
        self.num_dwells as f64
    }
}

/// Normalized spectral correlations per dwell lag for the noise
/// residuals, the pilot, and the data spectrum.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    /// α_w at dwell lags 0, 1, 2, ...; index 0 is 1 by construction.
    pub noise: Vec<f64>,
    /// α_p per dwell lag.
    pub pilot: Vec<f64>,
    /// α_s per dwell lag.
    pub data: Vec<f64>,
}

/// Accumulated correlations A_Nd for one dwell count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulated {
    pub noise: f64,
    pub pilot: f64,
}

impl CorrelationProfile {
    /// A lag-independent profile (α constant for all lags ≥ 1).
    pub fn constant(alpha_w: f64, alpha_p: f64, alpha_s: f64, max_lag: usize) -> Self {
        let mk = |a: f64| {
            let mut v = vec![a; max_lag + 1];
            v[0] = 1.0;
            v
        };
        Self { noise: mk(alpha_w), pilot: mk(alpha_p), data: mk(alpha_s) }
    }

    /// Uncorrelated dwells: every lag ≥ 1 is zero.
    pub fn white(max_lag: usize) -> Self {
        Self::constant(0.0, 0.0, 0.0, max_lag)
    }

    fn at(seq: &[f64], lag: usize) -> f64 {
        seq.get(lag).copied().unwrap_or(0.0)
    }

    pub fn alpha_w(&self, lag: usize) -> f64 {
        Self::at(&self.noise, lag)
    }

    pub fn alpha_p(&self, lag: usize) -> f64 {
        Self::at(&self.pilot, lag)
    }

    pub fn alpha_s(&self, lag: usize) -> f64 {
        Self::at(&self.data, lag)
    }

    /// Accumulated correlations over the dwell pairs of one decision:
    /// A = Σ_{l=1}^{N_d−1} (N_d−l)·α(l). Recompute whenever N_d changes.
    pub fn accumulated(&self, num_dwells: usize) -> Accumulated {
        let mut a_w = 0.0;
        let mut a_p = 0.0;
        for l in 1..num_dwells {
            let weight = (num_dwells - l) as f64;
            a_w += weight * self.alpha_w(l);
            a_p += weight * self.alpha_p(l);
        }
        Accumulated { noise: a_w, pilot: a_p }
    }
}

fn kron(l: usize) -> f64 {
    if l == 0 {
        1.0
    } else {
        0.0
    }
}

/// In-band mean spectrum of signal plus noise at one dwell:
/// μ_τ = N_w + δ_p(τ)/(2K) + N_s(τ)/2. The `low_snr` variant drops the
/// N_s/2 term.
pub fn mean_inband_spectrum(
    p: &SpectralParams,
    pilot_psd_tau: f64,
    signal_psd_tau: f64,
    low_snr: bool,
) -> f64 {
    let base = p.noise_psd + pilot_psd_tau / (2.0 * p.k());
    if low_snr {
        base
    } else {
        base + signal_psd_tau / 2.0
    }
}

/// Mean and variance of a covariance entry at dwell lag l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean of c_τu with the signal present (H0 follows from
/// N_s = δ_p = 0): α_w N_w² + (α_p/2K)δ_p² + N_s(N_w + (N_s+N_w)α_s),
/// dropping O(1/K²).
pub fn cov_mean(p: &SpectralParams, prof: &CorrelationProfile, lag: usize) -> f64 {
    let nw = p.noise_psd;
    let ns = p.signal_psd;
    let dp = p.pilot_psd;
    prof.alpha_w(lag) * nw * nw
        + prof.alpha_p(lag) / (2.0 * p.k()) * dp * dp
        + ns * (nw + (ns + nw) * prof.alpha_s(lag))
}

/// Low-SNR simplification of [`cov_mean`]: the data-spectrum terms are
/// dropped, keeping α_w N_w² + (α_p/2K)δ_p².
pub fn cov_mean_low_snr(p: &SpectralParams, prof: &CorrelationProfile, lag: usize) -> f64 {
    let nw = p.noise_psd;
    let dp = p.pilot_psd;
    prof.alpha_w(lag) * nw * nw + prof.alpha_p(lag) / (2.0 * p.k()) * dp * dp
}

/// Variance of c_τu at dwell lag l, with the Kronecker δ(l) terms.
pub fn cov_variance(p: &SpectralParams, prof: &CorrelationProfile, lag: usize) -> f64 {
    let nw = p.noise_psd;
    let dp = p.pilot_psd;
    let k = p.k();
    let d = kron(lag);
    let ratio = 1.0 + dp / nw;
    nw * nw * dp * dp / (2.0 * k * k) * ratio * ratio * (1.0 + prof.alpha_p(lag) * d)
        + nw * nw / (4.0 * k * k) * (k + ratio * ratio) * (2.0 + nw * nw * d)
}

/// Both moments of c_τu at one lag.
pub fn cov_moments(p: &SpectralParams, prof: &CorrelationProfile, lag: usize) -> Result<CovMoments> {
    if lag > p.num_dwells - 1 {
        return Err(Error::InvalidConfig(format!(
            "lag {lag} exceeds N_d - 1 = {}",
            p.num_dwells - 1
        )));
    }
    Ok(CovMoments {
        mean: cov_mean(p, prof, lag),
        variance: cov_variance(p, prof, lag),
    })
}

/// The three per-region variance contributions of one bin product and
/// their combination var(c_τu) = (K·C0 + C1 + K·C2)/(4K²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionVariances {
    /// Noise-only region (k below the pilot).
    pub c0: f64,
    /// Pilot bin.
    pub c1: f64,
    /// Data region (k above the pilot).
    pub c2: f64,
    /// Combined variance of c_τu.
    pub combined: f64,
}

/// Evaluates the three-region variance decomposition at dwell lag l.
pub fn region_variances(p: &SpectralParams, prof: &CorrelationProfile, lag: usize) -> RegionVariances {
    let nw = p.noise_psd;
    let ns = p.signal_psd;
    let dp = p.pilot_psd;
    let k = p.k();
    let d = kron(lag);
    let ap = prof.alpha_p(lag);

    let c0 = nw * nw * (dp * dp / (2.0 * k * k) * (1.0 + ap * d) + 2.0 + nw * nw * d);
    let c1 = 2.0 * (nw + dp) * (nw + dp) * (dp * dp * (1.0 + ap * d) + (nw + dp) * (nw + dp) * d);
    let c2 = 2.0 * nw * nw * (dp * dp / (4.0 * k * k) * (1.0 + ap * d) + (nw + ns) * (nw + ns) * d);
    let combined = (k * c0 + c1 + k * c2) / (4.0 * k * k);
    RegionVariances { c0, c1, c2, combined }
}

/// Exact variance of a product of jointly Gaussian variables:
/// var(XY) = E[X]²σ_Y² + E[Y]²σ_X² + 2E[X]E[Y]cov + σ_X²σ_Y² + cov².
pub fn var_of_product(mean_x: f64, mean_y: f64, var_x: f64, var_y: f64, cov_xy: f64) -> f64 {
    mean_x * mean_x * var_y
        + mean_y * mean_y * var_x
        + 2.0 * mean_x * mean_y * cov_xy
        + var_x * var_y
        + cov_xy * cov_xy
}

/// Low-SNR moments of the test terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMoments {
    pub e_t1: f64,
    pub e_t2: f64,
    pub var_t2: f64,
}

/// E[T1], E[T2], var(T2) in the low-SNR regime; the H0 case (all signal
/// levels zero) is exact.
pub fn test_moments(p: &SpectralParams, prof: &CorrelationProfile) -> TestMoments {
    let nw = p.noise_psd;
    let dp = p.pilot_psd;
    let k = p.k();
    let nd = p.nd();
    let acc = prof.accumulated(p.num_dwells);

    let e_t2 = nw * nw + dp * dp / (2.0 * k);
    let e_t1 = e_t2 + 2.0 * acc.noise / nd * nw * nw + acc.pilot / (k * nd) * dp * dp;
    let var_t2 = (dp * dp * (nw + dp) * (nw + dp)
        + nw * nw / 4.0 * (nw * nw * k + (nw + dp) * (nw + dp)))
        / (k * k * nd);
    TestMoments { e_t1, e_t2, var_t2 }
}

/// Exact H0 variance of T2 used by the threshold derivation:
/// var(T2 | H0) = N_w⁴/(4·K·N_d).
pub fn var_t2_h0(noise_psd: f64, half_bins: usize, num_dwells: usize) -> f64 {
    noise_psd.powi(4) / (4.0 * half_bins as f64 * num_dwells as f64)
}

/// The H1 variance bound used by the detection-probability derivation:
/// var(T2 | H1) ≤ (N_w² + 2δ_p²/K)²/(4·N_d). At δ_p = 0 this disagrees
/// with [`var_t2_h0`] by a factor K; both forms are kept verbatim and the
/// discrepancy is reported by the model-validation output.
pub fn var_t2_h1_bound(noise_psd: f64, pilot_psd: f64, half_bins: usize, num_dwells: usize) -> f64 {
    let k = half_bins as f64;
    let inner = noise_psd * noise_psd + 2.0 * pilot_psd * pilot_psd / k;
    inner * inner / (4.0 * num_dwells as f64)
}

/// Analytical decision threshold:
/// γ = 2√(K·N_d)·(1 + 2A_w/N_d) / (Q⁻¹(1−P_FA) + 2√(K·N_d)).
///
/// Q⁻¹(1−p) is evaluated as Φ⁻¹(p). A non-positive denominator
/// (pathologically small K·N_d with an extreme P_FA) is reported as a
/// distinct error.
pub fn threshold(half_bins: usize, num_dwells: usize, a_w: f64, pfa_req: f64) -> Result<f64> {
    if !(pfa_req > 0.0 && pfa_req < 1.0) {
        return Err(Error::InvalidConfig("pfa_req must lie in (0, 1)".into()));
    }
    let root = 2.0 * (half_bins as f64 * num_dwells as f64).sqrt();
    let denominator = norm_ppf(pfa_req) + root;
    if denominator <= 0.0 {
        return Err(Error::DegenerateThreshold { denominator });
    }
    Ok(root * (1.0 + 2.0 * a_w / num_dwells as f64) / denominator)
}

/// Predicted false-alarm probability for a threshold:
/// P_FA = 1 − Q( (2√(K·N_d)/γ)(1 + 2A_w/N_d) − 2√(K·N_d) ).
pub fn predicted_pfa(gamma: f64, half_bins: usize, num_dwells: usize, a_w: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig("gamma must be positive".into()));
    }
    let root = 2.0 * (half_bins as f64 * num_dwells as f64).sqrt();
    let arg = root / gamma * (1.0 + 2.0 * a_w / num_dwells as f64) - root;
    Ok(norm_cdf(arg))
}

/// Effective SNR of the pilot bin: Γ_p = (f_p·B·N/F_s)·snr.
pub fn effective_snr(
    pilot_fraction: f64,
    bandwidth_hz: f64,
    fft_size: usize,
    decimated_rate_hz: f64,
    snr_linear: f64,
) -> f64 {
    pilot_fraction * bandwidth_hz * fft_size as f64 / decimated_rate_hz * snr_linear
}

/// Predicted detection probability at effective SNR Γ_p.
pub fn predicted_pd(
    gamma: f64,
    half_bins: usize,
    num_dwells: usize,
    a_w: f64,
    a_p: f64,
    effective_snr: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig("gamma must be positive".into()));
    }
    if effective_snr < 0.0 {
        return Err(Error::InvalidConfig("effective SNR must be >= 0".into()));
    }
    let k = half_bins as f64;
    let nd = num_dwells as f64;
    let g2 = effective_snr * effective_snr;
    let term_noise = 2.0 * nd.sqrt() / gamma * (1.0 + 2.0 * a_w / nd - gamma);
    let term_pilot = (nd + 2.0 * a_p - gamma * nd) / (gamma * k * nd.sqrt()) * g2;
    let arg = (term_noise + term_pilot) / (1.0 + 2.0 * g2 / k);
    Ok(norm_cdf(arg))
}

/// Estimates the noise correlation profile α_w from noise-only
/// spectrograms: per lag, the mean covariance between dwells l apart
/// normalized by the mean autocovariance. Estimates are clamped to
/// [−1, 1]; α_w(0) = 1 by construction.
pub fn estimate_noise_correlations(h0: &[Spectrogram]) -> Result<Vec<f64>> {
    if h0.is_empty() {
        return Err(Error::InvalidConfig("need at least one H0 spectrogram".into()));
    }
    let n_d = h0[0].num_dwells;
    let mut acc = vec![0.0f64; n_d];
    let mut cnt = vec![0u64; n_d];
    for sg in h0 {
        if sg.num_dwells != n_d {
            return Err(Error::InvalidConfig("spectrogram dwell counts differ".into()));
        }
        let c = covariance(sg)?;
        for tau in 0..n_d {
            for l in 0..n_d - tau {
                acc[l] += c.get(tau, tau + l);
                cnt[l] += 1;
            }
        }
    }
    let diag = acc[0] / cnt[0] as f64;
    if diag <= 0.0 {
        return Err(Error::InvalidConfig("degenerate H0 spectrograms".into()));
    }
    Ok((0..n_d)
        .map(|l| ((acc[l] / cnt[l] as f64) / diag).clamp(-1.0, 1.0))
        .collect())
}

/// Estimates the pilot correlation profile α_p from signal-present
/// spectrograms, subtracting the H0 pilot-bin floor.
pub fn estimate_pilot_correlations(h0: &[Spectrogram], h1: &[Spectrogram]) -> Result<Vec<f64>> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::InvalidConfig("need spectrograms for both hypotheses".into()));
    }
    let n_d = h1[0].num_dwells;
    let mut floor = 0.0;
    let mut floor_n = 0u64;
    for sg in h0 {
        for tau in 0..sg.num_dwells {
            floor += sg.value(0, tau);
            floor_n += 1;
        }
    }
    let floor = floor / floor_n as f64;

    let mut acc = vec![0.0f64; n_d];
    let mut cnt = vec![0u64; n_d];
    let mut mean = 0.0;
    let mut mean_n = 0u64;
    for sg in h1 {
        if sg.num_dwells != n_d {
            return Err(Error::InvalidConfig("spectrogram dwell counts differ".into()));
        }
        let d: Vec<f64> = (0..n_d).map(|tau| sg.value(0, tau) - floor).collect();
        for tau in 0..n_d {
            mean += d[tau];
            mean_n += 1;
            for l in 0..n_d - tau {
                acc[l] += d[tau] * d[tau + l];
                cnt[l] += 1;
            }
        }
    }
    let mean = mean / mean_n as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidConfig(
            "pilot level not above the noise floor; cannot normalize".into(),
        ));
    }
    Ok((0..n_d)
        .map(|l| ((acc[l] / cnt[l] as f64) / (mean * mean)).clamp(-1.0, 1.0))
        .collect())
}

/// Full correlation-profile estimator over both hypothesis sets.
///
/// Requires at least 100 spectrograms per hypothesis. The data-spectrum
/// correlation α_s is not identifiable at low SNR and is reported as zero.
pub fn estimate_correlations(h0: &[Spectrogram], h1: &[Spectrogram]) -> Result<CorrelationProfile> {
    if h0.len() < 100 || h1.len() < 100 {
        return Err(Error::InvalidConfig(format!(
            "need >= 100 spectrograms per hypothesis, got {} H0 and {} H1",
            h0.len(),
            h1.len()
        )));
    }
    let noise = estimate_noise_correlations(h0)?;
    let pilot = estimate_pilot_correlations(h0, h1)?;
    let data = vec![0.0; noise.len()];
    Ok(CorrelationProfile { noise, pilot, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{spectrogram, FrontendConfig};
    use crate::signal::{generate_noise, NoiseModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn params(nw: f64, ns: f64, dp: f64, k: usize, nd: usize) -> SpectralParams {
        SpectralParams::new(nw, ns, dp, k, nd).unwrap()
    }

    #[test]
    fn mean_spectrum_reduces_to_noise_under_h0() {
        let p = params(1.7, 0.0, 0.0, 19, 30);
        assert_eq!(mean_inband_spectrum(&p, 0.0, 0.0, false), 1.7);
    }

    #[test]
    fn mean_spectrum_direct_substitution() {
        let p = params(1.0, 0.0, 0.0, 19, 30);
        assert_eq!(mean_inband_spectrum(&p, 38.0, 0.0, false), 2.0);
        // Low-SNR variant drops the N_s/2 term.
        assert_eq!(mean_inband_spectrum(&p, 38.0, 3.0, false), 3.5);
        assert_eq!(mean_inband_spectrum(&p, 38.0, 3.0, true), 2.0);
    }

    #[test]
    fn mean_spectrum_matches_simulated_column_means() {
        // Flat-band oracle: white noise at the decimated rate straight
        // into the spectrogram (no shaping filter), plus a pilot injected
        // at DC. The column mean must match the prediction to 2%; K is
        // kept large enough that the dropped O(1/K²) terms stay inside
        // that tolerance.
        let cfg = FrontendConfig::new(0.0, 4096.0, 1000.0, 0.03125, 10).unwrap();
        let n = cfg.fft_size();
        assert_eq!(n, 128);
        let k = cfg.half_bins();
        let pilot_power: f64 = 0.5; // watts -> bin level N·p
        let nm = NoiseModel::new(1.0, 0.0).unwrap();
        let trials = 1000;
        let mut acc = 0.0;
        let mut cnt = 0u64;
        for seed in 0..trials {
            let mut z = generate_noise(&nm, cfg.decimated_samples(), 4096.0, seed).unwrap();
            let amp = pilot_power.sqrt();
            for s in z.samples.iter_mut() {
                *s += num_complex::Complex64::new(amp, 0.0);
            }
            let sg = spectrogram(&z, &cfg).unwrap();
            for tau in 0..sg.num_dwells {
                acc += sg.column(tau).iter().sum::<f64>() / sg.rows() as f64;
                cnt += 1;
            }
        }
        let measured = acc / cnt as f64;
        let p = params(1.0, 0.0, 0.0, k, 10);
        let delta_p = n as f64 * pilot_power;
        let predicted = mean_inband_spectrum(&p, delta_p, 0.0, false);
        assert!(
            (measured - predicted).abs() < 0.02 * predicted,
            "measured {measured} vs predicted {predicted}"
        );
    }

    #[test]
    fn cov_mean_h0_off_diagonal_vanishes_without_correlation() {
        let p = params(1.3, 0.0, 0.0, 19, 30);
        let prof = CorrelationProfile::white(30);
        assert_eq!(cov_mean(&p, &prof, 3), 0.0);
        // l = 0 keeps the autocovariance N_w².
        assert!((cov_mean(&p, &prof, 0) - 1.3f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn cov_mean_h0_matches_monte_carlo_autocovariance() {
        // Flat-band noise spectrograms: E[c_ττ] should equal α⁰·N_w² with
        // N_w the bin mean, within 5% over 1e4 spectrograms.
        let cfg = FrontendConfig::new(0.0, 4096.0, 500.0, 0.03125, 6).unwrap();
        let nm = NoiseModel::new(1.0, 0.0).unwrap();
        let mut diag = 0.0;
        let mut level = 0.0;
        let mut n_diag = 0u64;
        let trials = 10_000;
        for seed in 0..trials {
            let z = generate_noise(&nm, cfg.decimated_samples(), 4096.0, seed).unwrap();
            let sg = spectrogram(&z, &cfg).unwrap();
            let c = covariance(&sg).unwrap();
            for tau in 0..sg.num_dwells {
                diag += c.get(tau, tau);
                level += sg.column(tau).iter().sum::<f64>() / sg.rows() as f64;
                n_diag += 1;
            }
        }
        let measured = diag / n_diag as f64;
        let nw = level / n_diag as f64;
        let p = params(nw, 0.0, 0.0, cfg.half_bins(), 6);
        let prof = CorrelationProfile::white(6);
        let predicted = cov_mean(&p, &prof, 0);
        assert!(
            (measured - predicted).abs() < 0.05 * predicted,
            "measured {measured} vs predicted {predicted}"
        );
    }

    #[test]
    fn cov_variance_monte_carlo_off_diagonal() {
        // Gaussian synthetic model of the band: V ~ N(0, N_w²) per bin.
        // The printed formula matches the model at l != 0 within 10%.
        let k = 19usize;
        let v = 2 * k + 1;
        let nd = 2usize;
        let trials = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..trials {
            let mut cols = [[0.0f64; 64]; 2];
            for col in cols.iter_mut() {
                for slot in col.iter_mut().take(v) {
                    let g: f64 = rng.sample(StandardNormal);
                    *slot = g;
                }
            }
            let mu0: f64 = cols[0][..v].iter().sum::<f64>() / v as f64;
            let mu1: f64 = cols[1][..v].iter().sum::<f64>() / v as f64;
            let c01: f64 = (0..v)
                .map(|r| (cols[0][r] - mu0) * (cols[1][r] - mu1))
                .sum::<f64>()
                / (2 * k) as f64;
            acc += c01;
            acc2 += c01 * c01;
        }
        let mean = acc / trials as f64;
        let var = acc2 / trials as f64 - mean * mean;
        let p = params(1.0, 0.0, 0.0, k, nd);
        let prof = CorrelationProfile::white(nd);
        let predicted = cov_variance(&p, &prof, 1);
        assert!(
            (var - predicted).abs() < 0.10 * predicted,
            "MC variance {var} vs formula {predicted}"
        );
    }

    #[test]
    fn cov_variance_delta_structure() {
        // The l = 0 terms switch on exactly the Kronecker contributions.
        let p = params(1.0, 0.0, 0.0, 19, 30);
        let prof = CorrelationProfile::white(30);
        let v0 = cov_variance(&p, &prof, 0);
        let v1 = cov_variance(&p, &prof, 1);
        let expected_ratio = (2.0 + 1.0) / 2.0; // (2 + N_w²δ)/2 at N_w = 1
        assert!(((v0 / v1) - expected_ratio).abs() < 1e-12);
        assert_eq!(cov_variance(&p, &prof, 2), v1);
    }

    #[test]
    fn region_variances_h0_reduction() {
        let p = params(1.0, 0.0, 0.0, 19, 30);
        let prof = CorrelationProfile::white(30);
        let r = region_variances(&p, &prof, 1);
        assert_eq!(r.c0, 2.0); // 2·N_w² at N_w = 1
        assert_eq!(r.c1, 0.0);
        assert_eq!(r.c2, 0.0);
        let k = 19.0;
        assert!((r.combined - 2.0 * k / (4.0 * k * k)).abs() < 1e-15);
        // Consistent with the covariance-variance H0 form to O(1/K).
        let eq21 = cov_variance(&p, &prof, 1);
        assert!((r.combined - eq21).abs() < eq21 / 15.0);
    }

    #[test]
    fn region_variances_same_dwell_doubles_delta_terms() {
        let p = params(1.0, 0.01, 38.0, 19, 30);
        let prof = CorrelationProfile::constant(0.0, 1.0, 0.0, 30);
        let same = region_variances(&p, &prof, 0);
        let diff = region_variances(&p, &prof, 1);
        // Each region gains exactly its δ(τ−u) contributions at l = 0.
        let nw = 1.0;
        let dp = 38.0;
        let ns = 0.01;
        let k = 19.0;
        assert!((same.c0 - diff.c0 - (nw * nw * (dp * dp / (2.0 * k * k) + nw * nw))).abs() < 1e-9);
        assert!(
            (same.c1
                - diff.c1
                - 2.0 * (nw + dp) * (nw + dp) * (dp * dp + (nw + dp) * (nw + dp)))
                .abs()
                < 1e-6
        );
        assert!(
            (same.c2 - diff.c2 - 2.0 * nw * nw * (dp * dp / (4.0 * k * k) + (nw + ns) * (nw + ns)))
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn region_variances_dual_implementation_oracle() {
        // Independent re-derivation of the three region expressions,
        // written out long-hand, evaluated at the reference point.
        let nw = 1.0f64;
        let dp = 38.0f64;
        let ns = 0.01f64;
        let k = 19.0f64;
        let p = params(nw, ns, dp, 19, 30);
        for (lag, d) in [(0usize, 1.0f64), (1usize, 0.0f64)] {
            let ap = if lag == 0 { 1.0 } else { 0.35 };
            let prof = CorrelationProfile::constant(0.3, 0.35, 0.0, 30);
            let r = region_variances(&p, &prof, lag);

            let c0_ref = nw.powi(2) * (dp.powi(2) / (2.0 * k.powi(2)) * (1.0 + ap * d))
                + nw.powi(2) * 2.0
                + nw.powi(2) * nw.powi(2) * d;
            let c1_ref = 2.0 * (nw + dp).powi(2) * dp.powi(2) * (1.0 + ap * d)
                + 2.0 * (nw + dp).powi(4) * d;
            let c2_ref = 2.0 * nw.powi(2) * dp.powi(2) / (4.0 * k.powi(2)) * (1.0 + ap * d)
                + 2.0 * nw.powi(2) * (nw + ns).powi(2) * d;
            let combined_ref = (k * c0_ref + c1_ref + k * c2_ref) / (4.0 * k.powi(2));

            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            assert!(rel(r.c0, c0_ref) < 1e-9, "C0 lag {lag}");
            assert!(rel(r.c1, c1_ref) < 1e-9, "C1 lag {lag}");
            assert!(rel(r.c2, c2_ref) < 1e-9, "C2 lag {lag}");
            assert!(rel(r.combined, combined_ref) < 1e-9, "combined lag {lag}");
        }
    }

    #[test]
    fn var_of_product_matches_monte_carlo() {
        // Correlated Gaussian pair, exact identity within 2% by MC.
        let (mx, my) = (1.5, -0.7);
        let (sx, sy) = (1.2f64, 0.8f64);
        let rho = 0.6;
        let cov = rho * sx * sy;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 400_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..trials {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let x = mx + sx * g1;
            let y = my + sy * (rho * g1 + (1.0 - rho * rho).sqrt() * g2);
            let xy = x * y;
            acc += xy;
            acc2 += xy * xy;
        }
        let mean = acc / trials as f64;
        let var = acc2 / trials as f64 - mean * mean;
        let predicted = var_of_product(mx, my, sx * sx, sy * sy, cov);
        assert!(
            (var - predicted).abs() < 0.02 * predicted,
            "MC {var} vs identity {predicted}"
        );
    }

    #[test]
    fn test_moments_h0_white_reduction() {
        let p = params(1.0, 0.0, 0.0, 19, 30);
        let prof = CorrelationProfile::white(30);
        let m = test_moments(&p, &prof);
        assert_eq!(m.e_t1, 1.0);
        assert_eq!(m.e_t2, 1.0);
        assert!((var_t2_h0(1.0, 19, 30) - 1.0 / (4.0 * 19.0 * 30.0)).abs() < 1e-18);
        // Eq-26 path at H0 carries the (K+1)/K finite-band factor.
        assert!((m.var_t2 - (19.0 + 1.0) / (4.0 * 19.0 * 19.0 * 30.0)).abs() < 1e-15);
    }

    #[test]
    fn t1_over_t2_growth_with_constant_alpha() {
        // E[T1]/E[T2] = 1 + 2A/N_d = 1 + α(N_d−1) under H0.
        let alpha = 0.32;
        for &nd in &[6usize, 12, 30] {
            let p = params(1.0, 0.0, 0.0, 19, nd);
            let prof = CorrelationProfile::constant(alpha, 0.0, 0.0, nd);
            let m = test_moments(&p, &prof);
            let expected = 1.0 + alpha * (nd as f64 - 1.0);
            assert!(
                ((m.e_t1 / m.e_t2) - expected).abs() < 1e-12,
                "N_d = {nd}: {} vs {expected}",
                m.e_t1 / m.e_t2
            );
        }
    }

    #[test]
    fn theorem_matches_lemma_summation() {
        // E[T1] from the theorem equals E[T2] + (2/N_d)·Σ pairs E[c_τu]
        // built from the per-lag means.
        let nd = 12usize;
        let p = params(1.3, 0.0, 2.0, 9, nd);
        let mut noise = vec![1.0];
        let mut pilot = vec![1.0];
        for l in 1..nd {
            noise.push(0.4 / l as f64);
            pilot.push(1.0 - 0.01 * l as f64);
        }
        let prof = CorrelationProfile { noise, pilot, data: vec![0.0; nd] };
        let m = test_moments(&p, &prof);
        let mut pair_sum = 0.0;
        for l in 1..nd {
            pair_sum += (nd - l) as f64 * cov_mean_low_snr(&p, &prof, l);
        }
        let e_t1_from_lemma = m.e_t2 + 2.0 / nd as f64 * pair_sum;
        assert!(
            (m.e_t1 - e_t1_from_lemma).abs() < 1e-12 * m.e_t1,
            "{} vs {}",
            m.e_t1,
            e_t1_from_lemma
        );
    }

    #[test]
    fn var_t2_forms_disagree_by_factor_k_at_h0() {
        let k = 19usize;
        let ratio = var_t2_h1_bound(1.0, 0.0, k, 30) / var_t2_h0(1.0, k, 30);
        assert!((ratio - k as f64).abs() < 1e-9);
    }

    #[test]
    fn threshold_median_case() {
        // pfa = 0.5 makes the quantile zero: γ = 1 + 2A/N_d exactly.
        let a = 143.0;
        let g = threshold(19, 30, a, 0.5).unwrap();
        assert!((g - (1.0 + 2.0 * a / 30.0)).abs() < 1e-12);
    }

    #[test]
    fn threshold_closed_form_spot_value() {
        let g = threshold(19, 30, 0.0, 0.1).unwrap();
        assert!(
            (g - 1.02758).abs() < 1e-4,
            "γ(K=19, N_d=30, A=0, pfa=0.1) = {g}"
        );
    }

    #[test]
    fn threshold_reports_degenerate_denominator() {
        // K·N_d = 1 with an extreme requirement drives the denominator
        // non-positive.
        assert!(matches!(
            threshold(1, 2, 0.0, 0.0005),
            Err(Error::DegenerateThreshold { .. })
        ));
    }

    #[test]
    fn threshold_and_predicted_pfa_are_inverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 1000 {
            let k = rng.gen_range(1..=64usize);
            let nd = rng.gen_range(2..=64usize);
            let a: f64 = rng.gen_range(0.0..(nd * nd) as f64 / 2.0);
            let p: f64 = rng.gen_range(0.001..0.999);
            match threshold(k, nd, a, p) {
                Ok(g) => {
                    let back = predicted_pfa(g, k, nd, a).unwrap();
                    assert!(
                        (back - p).abs() < 1e-9,
                        "K={k} N_d={nd} A={a} p={p}: round trip {back}"
                    );
                    checked += 1;
                }
                Err(Error::DegenerateThreshold { .. }) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }

    #[test]
    fn predicted_pfa_decreases_in_gamma() {
        let mut last = 1.0;
        for i in 1..60 {
            let g = 0.5 + i as f64 * 0.25;
            let p = predicted_pfa(g, 19, 30, 140.0).unwrap();
            assert!(p <= last + 1e-15, "not monotone at γ = {g}");
            last = p;
        }
    }

    #[test]
    fn effective_snr_values() {
        assert_eq!(effective_snr(0.05, 6.0e6, 2048, 2.152e6, 0.0), 0.0);
        let g = effective_snr(0.05, 6.0e6, 2048, 2.152e6, 10f64.powf(-2.1));
        assert!((g - 2.267).abs() < 1e-3, "Γ_p = {g}");
        let doubled = effective_snr(0.05, 6.0e6, 4096, 2.152e6, 10f64.powf(-2.1));
        assert!((doubled - 2.0 * g).abs() < 1e-12);
    }

    #[test]
    fn predicted_pd_half_at_balanced_threshold() {
        let nd = 30usize;
        let a_w = 100.0;
        let gamma = 1.0 + 2.0 * a_w / nd as f64;
        let pd = predicted_pd(gamma, 19, nd, a_w, 0.0, 0.0).unwrap();
        assert!((pd - 0.5).abs() < 1e-12);
    }

    #[test]
    fn predicted_pd_increases_with_effective_snr() {
        let nd = 30usize;
        let a_w = 140.0;
        let a_p = 435.0;
        let gamma = 10.6;
        // γ ≤ (N_d + 2A_p)/N_d = 30 here, the monotone region.
        let mut last = 0.0;
        for i in 0..40 {
            let g_p = i as f64 * 0.25;
            let pd = predicted_pd(gamma, 19, nd, a_w, a_p, g_p).unwrap();
            assert!(pd >= last - 1e-12, "not monotone at Γ_p = {g_p}");
            last = pd;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn accumulated_correlation_of_constant_profile() {
        let alpha = 0.25;
        for &nd in &[2usize, 6, 12, 30] {
            let prof = CorrelationProfile::constant(alpha, 0.0, 0.0, nd);
            let acc = prof.accumulated(nd);
            let expected = alpha * (nd * (nd - 1)) as f64 / 2.0;
            assert!((acc.noise - expected).abs() < 1e-12, "N_d = {nd}");
        }
    }

    #[test]
    fn estimated_noise_correlations_vanish_for_independent_dwells() {
        // Unfiltered white noise: dwell periodograms are independent, so
        // α_w(l ≥ 1) ≈ 0 and α_w(0) = 1 exactly.
        let cfg = FrontendConfig::new(0.0, 4096.0, 500.0, 0.03125, 8).unwrap();
        let nm = NoiseModel::new(1.0, 0.0).unwrap();
        let sgs: Vec<Spectrogram> = (0..150)
            .map(|seed| {
                let z = generate_noise(&nm, cfg.decimated_samples(), 4096.0, seed).unwrap();
                spectrogram(&z, &cfg).unwrap()
            })
            .collect();
        let alpha = estimate_noise_correlations(&sgs).unwrap();
        assert_eq!(alpha[0], 1.0);
        for (l, &a) in alpha.iter().enumerate().skip(1) {
            assert!(a.abs() < 0.05, "α_w({l}) = {a}");
        }
    }

    #[test]
    fn estimate_correlations_requires_both_hypotheses() {
        let cfg = FrontendConfig::new(0.0, 4096.0, 500.0, 0.03125, 4).unwrap();
        let nm = NoiseModel::new(1.0, 0.0).unwrap();
        let z = generate_noise(&nm, cfg.decimated_samples(), 4096.0, 0).unwrap();
        let sg = spectrogram(&z, &cfg).unwrap();
        let sgs = vec![sg; 120];
        assert!(estimate_correlations(&sgs, &[]).is_err());
        assert!(estimate_correlations(&sgs[..50], &sgs).is_err());
    }
}
