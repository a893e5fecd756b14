//! Quick probe: empirical H0 thresholds over the calibration grid,
//! compared with the analytic form using estimated dwell correlations.

use rayon::prelude::*;
use scs::analytic::{estimate_noise_correlations, threshold, CorrelationProfile};
use scs::detector::{covariance, derive_seed, quantile, test_statistic};
use scs::frontend::{narrowband_filter, spectrogram, FrontendConfig};
use scs::signal::{generate_noise, NoiseModel};

fn main() {
    let f_s = 2.152e6;
    let b_f = 2.0e4;
    let trials = 4000usize;
    let table_sim = [
        (6, [3.59, 3.07, 2.92, 2.75]),
        (12, [6.51, 5.27, 4.29, 4.79]),
        (30, [14.17, 11.27, 10.95, 10.62]),
    ];
    let ts_ms = [0.1, 0.5, 1.0, 2.0];

    for (nd, refs) in table_sim {
        for (j, &ts) in ts_ms.iter().enumerate() {
            let cfg = FrontendConfig::new(0.0, f_s, b_f, ts * 1e-3, nd).unwrap();
            let n_needed = cfg.decimated_samples() + 4000;
            let nm = NoiseModel::new(1.0, 0.0).unwrap();
            let start = std::time::Instant::now();
            let results: Vec<(f64, Vec<f64>)> = (0..trials as u64)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(1234, i);
                    let z = generate_noise(&nm, n_needed, f_s, seed).unwrap();
                    let filtered = narrowband_filter(&z, b_f).unwrap();
                    let sg = spectrogram(&filtered, &cfg).unwrap();
                    let c = covariance(&sg).unwrap();
                    let t = test_statistic(&c).unwrap().t;
                    let mut lags = vec![0.0; nd];
                    for tau in 0..nd {
                        for l in 0..nd - tau {
                            lags[l] += c.get(tau, tau + l) / (nd - l) as f64;
                        }
                    }
                    (t, lags)
                })
                .collect();
            let mut ts_sorted: Vec<f64> = results.iter().map(|r| r.0).collect();
            ts_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let gamma_emp = quantile(&ts_sorted, 0.9);

            // Per-lag alpha from accumulated covariances.
            let mut acc = vec![0.0; nd];
            for (_, lags) in &results {
                for (l, v) in lags.iter().enumerate() {
                    acc[l] += v;
                }
            }
            let alpha: Vec<f64> = acc.iter().map(|v| v / acc[0]).collect();
            let a_w: f64 = (1..nd).map(|l| (nd - l) as f64 * alpha[l]).sum();
            let k = cfg.half_bins();
            let gamma_ana = threshold(k, nd, a_w, 0.1).unwrap();

            let reference = refs[j];
            println!(
                "nd={nd:2} ts={ts:3}ms K={k:2} | emp {gamma_emp:6.2} ana {gamma_ana:6.2} | table {reference:6.2} | emp/table {:+6.1}% ana/emp {:+6.1}% | alpha1 {:.3} mean(T) {:.2} | {:.1}s",
                100.0 * (gamma_emp / reference - 1.0),
                100.0 * (gamma_ana / gamma_emp - 1.0),
                alpha[1],
                ts_sorted.iter().sum::<f64>() / ts_sorted.len() as f64,
                start.elapsed().as_secs_f64()
            );
        }
    }
    // Spot check estimate_noise_correlations path matches the inline one.
    let cfg = FrontendConfig::new(0.0, f_s, b_f, 1e-3, 12).unwrap();
    let nm = NoiseModel::new(1.0, 0.0).unwrap();
    let sgs: Vec<_> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let z = generate_noise(&nm, cfg.decimated_samples() + 4000, f_s, derive_seed(9, i))
                .unwrap();
            let filtered = narrowband_filter(&z, b_f).unwrap();
            spectrogram(&filtered, &cfg).unwrap()
        })
        .collect();
    let alpha = estimate_noise_correlations(&sgs).unwrap();
    let prof = CorrelationProfile { noise: alpha.clone(), pilot: vec![0.0; 12], data: vec![0.0; 12] };
    let acc = prof.accumulated(12);
    println!("estimator alpha[0..4] = {:?} A_12 = {:.2}", &alpha[..4], acc.noise);
}
