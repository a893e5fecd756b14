//! Process-wide FFT plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanMap = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

fn cache() -> &'static Mutex<PlanMap> {
    static CACHE: OnceLock<Mutex<PlanMap>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    plan(len, true)
}

pub fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    plan(len, false)
}

fn plan(len: usize, fwd: bool) -> Arc<dyn Fft<f64>> {
    let mut map = cache().lock().unwrap();
    map.entry((len, fwd))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if fwd {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// In-place forward FFT (unnormalized, rustfft convention).
pub fn fft_in_place(buf: &mut [Complex64]) {
    forward(buf.len()).process(buf);
}

/// In-place inverse FFT. rustfft leaves the 1/N normalization to the
/// caller; this helper applies it.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for z in buf.iter_mut() {
        *z *= scale;
    }
}
