//! Histogram-based divergences between real and synthetic value distributions.

use super::MeasureInput;
use crate::error::Result;
use crate::kernels::spectral::histogram_pmf;

/// Equal-width bins over the combined value range.
pub const BINS: usize = 100;

fn range(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// pmfs of both samples on a shared binning, plus the bin width.
fn shared_pmfs(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let (lo, hi) = range(a, b);
    Ok((
        histogram_pmf(a, lo, hi, BINS)?,
        histogram_pmf(b, lo, hi, BINS)?,
        (hi - lo) / BINS as f64,
    ))
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

pub fn js(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl(p, &m) + 0.5 * kl(q, &m)).max(0.0)
}

/// Earth mover's distance between two pmfs on equally spaced bin centers.
pub fn emd_1d(p: &[f64], q: &[f64], width: f64) -> f64 {
    let mut cdf = 0.0;
    let mut total = 0.0;
    for (a, b) in p.iter().zip(q) {
        cdf += a - b;
        total += cdf.abs();
    }
    total * width
}

fn embedded_values(input: &MeasureInput, measure: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let e = input.embedded(measure)?;
    Ok((
        e.train.vectors.iter().copied().collect(),
        e.synth.vectors.iter().copied().collect(),
    ))
}

/// Jensen-Shannon divergence (natural log) of the embedded scalar distributions.
pub fn jsd(input: &MeasureInput) -> Result<f64> {
    let (a, b) = embedded_values(input, "jsd")?;
    let (p, q, _) = shared_pmfs(&a, &b)?;
    Ok(js(&p, &q))
}

/// Kullback-Leibler divergence KL(real ‖ synthetic) of the embedded scalar distributions.
pub fn kld(input: &MeasureInput) -> Result<f64> {
    let (a, b) = embedded_values(input, "kld")?;
    let (p, q, _) = shared_pmfs(&a, &b)?;
    Ok(kl(&p, &q).max(0.0))
}

/// Wasserstein-1 distance between the binned embedded scalar distributions.
pub fn wd_on_pmf(input: &MeasureInput) -> Result<f64> {
    let (a, b) = embedded_values(input, "wd_on_pmf")?;
    let (p, q, width) = shared_pmfs(&a, &b)?;
    Ok(emd_1d(&p, &q, width))
}

/// Per channel, the mean absolute difference between the binned value distributions;
/// averaged over channels.
pub fn distributional_metric(input: &MeasureInput) -> Result<f64> {
    let d = input.train.channels();
    let mut total = 0.0;
    for c in 0..d {
        let a: Vec<f64> = input.train.values().index_axis(ndarray::Axis(2), c).iter().copied().collect();
        let b: Vec<f64> = input.synth.values().index_axis(ndarray::Axis(2), c).iter().copied().collect();
        let (p, q, _) = shared_pmfs(&a, &b)?;
        total += p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>() / BINS as f64;
    }
    Ok(total / d as f64)
}
