//! SCS detector core: spectrogram covariance, the T = T1/T2 statistic,
//! decisions, and empirical threshold calibration.

use rayon::prelude::*;

use crate::frontend::{decimate, downconvert, spectrogram, FrontendConfig, Spectrogram};
use crate::iq::IqBuffer;
use crate::{Error, Result};

/// Sample covariance of the partial spectrogram.
///
/// Column means use 1/(2K+1); covariances use 1/(2K). Both normalizations
/// are kept as defined because the published threshold table was produced
/// with them.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    /// Row-major N_d×N_d symmetric matrix.
    values: Vec<f64>,
    /// Per-dwell in-band means μ_τ.
    pub column_means: Vec<f64>,
    pub num_dwells: usize,
}

impl CovarianceMatrix {
    pub fn get(&self, tau: usize, u: usize) -> f64 {
        self.values[tau * self.num_dwells + u]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Builds a covariance matrix from raw values (test support).
    pub fn from_values(values: Vec<f64>, column_means: Vec<f64>, num_dwells: usize) -> Result<Self> {
        if values.len() != num_dwells * num_dwells || column_means.len() != num_dwells {
            return Err(Error::InvalidConfig("covariance dimensions inconsistent".into()));
        }
        Ok(Self { values, column_means, num_dwells })
    }
}

/// The SCS test statistic T = T1/T2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStatistic {
    /// Mean of all covariance entries.
    pub t1: f64,
    /// Mean of the diagonal autocovariances.
    pub t2: f64,
    /// T1/T2.
    pub t: f64,
}

/// Binary hypothesis decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// No primary present.
    H0,
    /// Primary detected.
    H1,
}

/// Statistic, threshold, and decision for one sensing pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub statistic: TestStatistic,
    pub threshold: f64,
    pub decision: Decision,
}

/// Computes μ_τ and the sample covariance of the spectrogram columns.
///
/// Each pair is computed once and mirrored, so c_τu == c_uτ exactly.
pub fn covariance(m: &Spectrogram) -> Result<CovarianceMatrix> {
    let n_d = m.num_dwells;
    let k = m.half_bins;
    if n_d < 2 {
        return Err(Error::InvalidConfig("covariance needs N_d >= 2 dwells".into()));
    }
    if k < 1 {
        return Err(Error::InvalidConfig("covariance needs K >= 1".into()));
    }
    let rows = m.rows();
    let inv_rows = 1.0 / rows as f64;
    let inv_2k = 1.0 / (2 * k) as f64;

    // Centered columns.
    let mut centered = vec![0.0f64; rows * n_d];
    let mut means = vec![0.0f64; n_d];
    for tau in 0..n_d {
        let col = m.column(tau);
        let mu = col.iter().sum::<f64>() * inv_rows;
        means[tau] = mu;
        for (r, &v) in col.iter().enumerate() {
            centered[tau * rows + r] = v - mu;
        }
    }

    let mut values = vec![0.0f64; n_d * n_d];
    for tau in 0..n_d {
        for u in tau..n_d {
            let a = &centered[tau * rows..(tau + 1) * rows];
            let b = &centered[u * rows..(u + 1) * rows];
            let c: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>() * inv_2k;
            values[tau * n_d + u] = c;
            values[u * n_d + tau] = c;
        }
    }
    Ok(CovarianceMatrix { values, column_means: means, num_dwells: n_d })
}

/// T2 = mean diagonal autocovariance; T1 = T2 plus twice the mean
/// upper-triangle mass; T = T1/T2.
///
/// A constant spectrogram makes T2 = 0 and is reported as
/// [`Error::DegenerateStatistic`] rather than a number.
pub fn test_statistic(c: &CovarianceMatrix) -> Result<TestStatistic> {
    let n_d = c.num_dwells;
    let inv_nd = 1.0 / n_d as f64;
    let mut diag = 0.0f64;
    let mut upper = 0.0f64;
    for tau in 0..n_d {
        diag += c.get(tau, tau);
        for u in tau + 1..n_d {
            upper += c.get(tau, u);
        }
    }
    let t2 = diag * inv_nd;
    if t2 == 0.0 {
        return Err(Error::DegenerateStatistic);
    }
    let t1 = t2 + 2.0 * upper * inv_nd;
    Ok(TestStatistic { t1, t2, t: t1 / t2 })
}

/// H1 iff T > γ; a tie is resolved to H0 (conservative for the
/// secondary user).
pub fn decide(stat: TestStatistic, gamma: f64) -> Result<Verdict> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {gamma}")));
    }
    let decision = if stat.t > gamma { Decision::H1 } else { Decision::H0 };
    Ok(Verdict { statistic: stat, threshold: gamma, decision })
}

/// Runs the full SCS chain (downconvert, decimate, spectrogram,
/// covariance) and returns the test statistic.
pub fn sense_statistic(z: &IqBuffer, cfg: &FrontendConfig) -> Result<TestStatistic> {
    let y = downconvert(z, cfg.pilot_freq_hz)?;
    let d = decimate(&y, cfg.decimated_rate_hz, cfg.lpf_cutoff_hz)?;
    let sg = spectrogram(&d, cfg)?;
    test_statistic(&covariance(&sg)?)
}

/// Full chain plus decision.
pub fn sense(z: &IqBuffer, cfg: &FrontendConfig, gamma: f64) -> Result<Verdict> {
    decide(sense_statistic(z, cfg)?, gamma)
}

/// Outcome of empirical threshold calibration.
#[derive(Debug, Clone)]
pub struct ThresholdEstimate {
    /// Empirical (1 − target_pfa) quantile of the H0 statistic.
    pub gamma: f64,
    /// Set when trials·target_pfa < 10 and the quantile is unstable.
    pub quantile_unstable: bool,
    /// The H0 statistics the quantile was taken over, sorted.
    pub h0_statistics: Vec<f64>,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Derives a per-trial seed from a base seed (splitmix64 over the pair).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut x = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Calibrates the decision threshold for a target false-alarm probability
/// by running `trials` noise-only pipelines and taking the empirical
/// (1 − target_pfa) quantile of T.
///
/// `noise_source(seed)` must return one trial's raw noise buffer; trials
/// execute in parallel with derived seeds and reduce in index order, so
/// the result is independent of scheduling.
pub fn calibrate_threshold<F>(
    noise_source: F,
    cfg: &FrontendConfig,
    target_pfa: f64,
    trials: usize,
    seed: u64,
) -> Result<ThresholdEstimate>
where
    F: Fn(u64) -> Result<IqBuffer> + Sync,
{
    if trials < 100 {
        return Err(Error::InvalidConfig(format!("calibration needs >= 100 trials, got {trials}")));
    }
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::InvalidConfig("target_pfa must lie in (0, 1)".into()));
    }
    let quantile_unstable = (trials as f64) * target_pfa < 10.0;

    let mut stats: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let buf = noise_source(derive_seed(seed, i))?;
            Ok(sense_statistic(&buf, cfg)?.t)
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gamma = quantile(&stats, 1.0 - target_pfa);
    Ok(ThresholdEstimate { gamma, quantile_unstable, h0_statistics: stats })
}
