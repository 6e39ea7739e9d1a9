//! FFT-based autocorrelation and spectra, and histogram binning.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Additive smoothing applied to every bin of a pmf.
pub const PMF_SMOOTHING: f64 = 1e-10;

fn fft_forward(x: &[f64], len: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf
}

/// Autocorrelation for lags `0..=max_lag`, normalized by lag 0. A constant series yields zeros beyond lag 0.
pub fn autocorr_fft(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; max_lag + 1];
    if n == 0 {
        return out;
    }
    out[0] = 1.0;
    let m = crate::kernels::stats::mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let len = (2 * n).next_power_of_two();
    let mut spec = fft_forward(&centered, len);
    for c in spec.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut spec);
    let r0 = spec[0].re;
    if r0.abs() <= 1e-12 * n as f64 {
        return out;
    }
    for (lag, slot) in out.iter_mut().enumerate().skip(1) {
        if lag < n {
            *slot = spec[lag].re / r0;
        }
    }
    out
}

/// Power at frequency bins `0..=n/2` of the mean-removed series.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let m = crate::kernels::stats::mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    fft_forward(&centered, n)
        .iter()
        .take(n / 2 + 1)
        .map(|c| c.norm_sqr() / n as f64)
        .collect()
}

/// Period (in samples) of the strongest non-zero frequency, or `None` for a flat spectrum.
pub fn dominant_period(x: &[f64]) -> Option<f64> {
    let p = power_spectrum(x);
    let (k, &power) = p
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))?;
    (power > 1e-12).then(|| x.len() as f64 / k as f64)
}

/// Equal-width histogram over `[lo, hi]` normalized to a pmf with additive smoothing.
pub fn histogram_pmf(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(invalid("a histogram needs at least 2 bins"));
    }
    let mut counts = vec![0.0; bins];
    let width = hi - lo;
    for &v in values {
        let b = if width > 0.0 {
            (((v - lo) / width) * bins as f64).floor() as isize
        } else {
            0
        };
        counts[b.clamp(0, bins as isize - 1) as usize] += 1.0;
    }
    let total: f64 = counts.iter().sum::<f64>() + PMF_SMOOTHING * bins as f64;
    Ok(counts.iter().map(|c| (c + PMF_SMOOTHING) / total).collect())
}
