//! Unit scaling and the two embedders: channel concatenation and per-channel statistical features.
//!
//! Both scaling and descriptor standardization are fitted on `D_train` only and then applied
//! unchanged to every other set of the same test.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::spectral::{autocorr_fft, power_spectrum};
use crate::kernels::stats::{approx_entropy_default, mean, median, quantile, variance_pop};
use crate::model::{Dataset, EmbeddedDataset, EmbedderKind};

/// Per-channel min-max map fitted on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl UnitScaler {
    pub fn fit(ds: &Dataset) -> Self {
        let (min, max) = crate::transforms::channel_ranges(ds).into_iter().unzip();
        Self { min, max }
    }

    /// Maps each channel to `[0, 1]` by the fitted range; constant channels map to 0.5.
    /// Values outside the fitted range are not clipped.
    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.channels() != self.min.len() {
            return Err(invalid(format!(
                "scaler fitted on {} channels, dataset has {}",
                self.min.len(),
                ds.channels()
            )));
        }
        let mut out = ds.clone();
        for ((_, _, c), v) in out.values_mut().indexed_iter_mut() {
            let (lo, hi) = (self.min[c], self.max[c]);
            *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
        }
        Ok(out)
    }
}

/// Scales `ds` with the ranges of `reference`.
pub fn scale_unit(reference: &Dataset, ds: &Dataset) -> Result<Dataset> {
    UnitScaler::fit(reference).transform(ds)
}

/// Row `i` holds channel 0 of instance `i`, then channel 1, and so on.
pub fn embed_concat(ds: &Dataset) -> EmbeddedDataset {
    let (n, l, d) = ds.shape();
    let vectors = Array2::from_shape_fn((n, l * d), |(i, k)| ds.values()[[i, k % l, k / l]]);
    EmbeddedDataset {
        vectors,
        source: ds.name.clone(),
        embedder: EmbedderKind::Concat.id().to_string(),
    }
}

pub const DESCRIPTOR_COUNT: usize = 24;
pub const MIN_DESCRIPTOR_LENGTH: usize = 8;

pub const DESCRIPTOR_NAMES: [&str; DESCRIPTOR_COUNT] = [
    "mean",
    "std",
    "skewness",
    "kurtosis",
    "min",
    "max",
    "median",
    "iqr",
    "first",
    "last",
    "acf_lag1",
    "acf_lag2",
    "acf_lag5",
    "zero_crossing_rate",
    "longest_run_above_mean",
    "spectral_centroid",
    "spectral_entropy",
    "dominant_power_ratio",
    "trend_slope",
    "mean_abs_change",
    "diff_std",
    "approx_entropy",
    "cumsum_mean_crossings",
    "hjorth_mobility",
];

fn slope(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mt = (n - 1.0) / 2.0;
    let my = mean(x);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let dt = t as f64 - mt;
        num += dt * (v - my);
        den += dt * dt;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn mean_crossings(x: &[f64]) -> usize {
    let m = mean(x);
    x.windows(2)
        .filter(|w| (w[0] - m) * (w[1] - m) < 0.0)
        .count()
}

/// The 24 descriptors of one univariate series, in [`DESCRIPTOR_NAMES`] order.
pub fn descriptors(x: &[f64]) -> Result<[f64; DESCRIPTOR_COUNT]> {
    let l = x.len();
    if l < MIN_DESCRIPTOR_LENGTH {
        return Err(invalid(format!(
            "statistical features need series of length >= {MIN_DESCRIPTOR_LENGTH}, got {l}"
        )));
    }
    let m = mean(x);
    let var = variance_pop(x);
    let sd = var.sqrt();
    let (skew, kurt) = if var > 0.0 {
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / l as f64;
        let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / l as f64;
        (m3 / var.powf(1.5), m4 / (var * var) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let acf = autocorr_fft(x, 5);

    let mut longest = 0usize;
    let mut run = 0usize;
    for &v in x {
        if v > m {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }

    let power = power_spectrum(x);
    let total: f64 = power.iter().skip(1).sum();
    let (centroid, entropy, ratio) = if total > 1e-12 {
        let bins = power.len() - 1;
        let mut centroid = 0.0;
        let mut entropy = 0.0;
        let mut peak: f64 = 0.0;
        for (k, p) in power.iter().enumerate().skip(1) {
            let w = p / total;
            centroid += w * k as f64 / l as f64;
            if w > 0.0 {
                entropy -= w * w.ln();
            }
            peak = peak.max(*p);
        }
        let norm = if bins > 1 { (bins as f64).ln() } else { 1.0 };
        (centroid, entropy / norm, peak / total)
    } else {
        (0.0, 0.0, 0.0)
    };

    let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_abs_change = diffs.iter().map(|v| v.abs()).sum::<f64>() / diffs.len() as f64;
    let diff_var = variance_pop(&diffs);
    let mut cumsum = Vec::with_capacity(l);
    let mut acc = 0.0;
    for v in x {
        acc += v - m;
        cumsum.push(acc);
    }
    let mobility = if var > 0.0 { (diff_var / var).sqrt() } else { 0.0 };

    Ok([
        m,
        sd,
        skew,
        kurt,
        min,
        max,
        median(x),
        quantile(x, 0.75) - quantile(x, 0.25),
        x[0],
        x[l - 1],
        acf[1],
        acf[2],
        acf[5],
        mean_crossings(x) as f64 / (l - 1) as f64,
        longest as f64 / l as f64,
        centroid,
        entropy,
        ratio,
        slope(x),
        mean_abs_change,
        diff_var.sqrt(),
        approx_entropy_default(x),
        mean_crossings(&cumsum) as f64,
        mobility,
    ])
}

/// Unstandardized descriptors: `n × (24 · d)`, channel blocks in channel order.
pub fn raw_descriptors(ds: &Dataset) -> Result<Array2<f64>> {
    let (n, _, d) = ds.shape();
    let mut out = Array2::zeros((n, DESCRIPTOR_COUNT * d));
    for i in 0..n {
        for c in 0..d {
            let desc = descriptors(&ds.channel(i, c))?;
            for (k, v) in desc.into_iter().enumerate() {
                out[[i, c * DESCRIPTOR_COUNT + k]] = v;
            }
        }
    }
    Ok(out)
}

/// The first seven descriptors per channel (location, spread and shape statistics).
pub fn summary_statistics(ds: &Dataset) -> Result<Array2<f64>> {
    const SUMMARY: usize = 7;
    let full = raw_descriptors(ds)?;
    let d = ds.channels();
    Ok(Array2::from_shape_fn((ds.n(), SUMMARY * d), |(i, k)| {
        full[[i, (k / SUMMARY) * DESCRIPTOR_COUNT + k % SUMMARY]]
    }))
}

/// Column means and standard deviations of `D_train` descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(features: &Array2<f64>) -> Self {
        let mut mean = Vec::with_capacity(features.ncols());
        let mut std = Vec::with_capacity(features.ncols());
        for col in features.axis_iter(Axis(1)) {
            let v = col.to_vec();
            mean.push(crate::kernels::stats::mean(&v));
            std.push(variance_pop(&v).sqrt());
        }
        Self { mean, std }
    }

    /// Zero-std columns pass through unchanged.
    pub fn apply(&self, features: &mut Array2<f64>) {
        for (j, mut col) in features.axis_iter_mut(Axis(1)).enumerate() {
            if self.std[j] > 1e-12 {
                col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
            }
        }
    }
}

/// An embedder with its `D_train`-fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedEmbedder {
    Concat,
    StatFeat(Standardization),
}

impl FittedEmbedder {
    pub fn fit(kind: EmbedderKind, train: &Dataset) -> Result<Self> {
        Ok(match kind {
            EmbedderKind::Concat => FittedEmbedder::Concat,
            EmbedderKind::StatFeat => {
                FittedEmbedder::StatFeat(Standardization::fit(&raw_descriptors(train)?))
            }
        })
    }

    pub fn kind(&self) -> EmbedderKind {
        match self {
            FittedEmbedder::Concat => EmbedderKind::Concat,
            FittedEmbedder::StatFeat(_) => EmbedderKind::StatFeat,
        }
    }

    pub fn embed(&self, ds: &Dataset) -> Result<EmbeddedDataset> {
        match self {
            FittedEmbedder::Concat => Ok(embed_concat(ds)),
            FittedEmbedder::StatFeat(standardization) => {
                let mut vectors = raw_descriptors(ds)?;
                standardization.apply(&mut vectors);
                Ok(EmbeddedDataset {
                    vectors,
                    source: ds.name.clone(),
                    embedder: EmbedderKind::StatFeat.id().to_string(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use ndarray::Array3;

    fn ds(values: Array3<f64>) -> Dataset {
        Dataset::new(values, None, "e", Role::Train).unwrap()
    }

    #[test]
    fn unit_scaling_examples() {
        let train = ds(Array3::from_shape_vec((3, 2, 2), vec![0., 3., 5., 3., 10., 3., 0., 3., 5., 3., 10., 3.]).unwrap());
        let out = scale_unit(&train, &train).unwrap();
        assert_eq!(out.channel(0, 0), vec![0.0, 0.5]);
        assert_eq!(out.channel(1, 0), vec![1.0, 0.0]);
        assert!(out.values().index_axis(Axis(2), 1).iter().all(|&v| v == 0.5));
        let other = ds(Array3::from_shape_vec((2, 2, 2), vec![20., 3., -10., 3., 0., 3., 0., 3.]).unwrap());
        let scaled = scale_unit(&train, &other).unwrap();
        assert_eq!(scaled.channel(0, 0), vec![2.0, -1.0]);
    }

    #[test]
    fn concat_layout() {
        // Instance [[1,3],[2,4]]: rows are time steps, columns channels.
        let values = Array3::from_shape_vec((2, 2, 2), vec![1., 3., 2., 4., 5., 7., 6., 8.]).unwrap();
        let e = embed_concat(&ds(values));
        assert_eq!(e.vectors.row(0).to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.dim(), 4);
    }

    #[test]
    fn constant_channel_descriptors() {
        let d = descriptors(&[3.0; 16]).unwrap();
        for name in ["std", "skewness", "kurtosis", "iqr", "mean_abs_change", "diff_std", "hjorth_mobility"] {
            let k = DESCRIPTOR_NAMES.iter().position(|n| *n == name).unwrap();
            assert_eq!(d[k], 0.0, "{name}");
        }
        assert_eq!(d[0], 3.0);
        assert!(descriptors(&[1.0; 7]).is_err());
    }

    #[test]
    fn descriptor_hand_values() {
        let x: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let d = descriptors(&x).unwrap();
        assert_eq!(d[0], 4.5);
        assert_eq!(d[4], 0.0);
        assert_eq!(d[5], 9.0);
        assert_eq!(d[6], 4.5);
        assert_eq!(d[7], 4.5);
        assert!((d[18] - 1.0).abs() < 1e-12);
        assert_eq!(d[19], 1.0);
        assert!((d[13] - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(d[14], 0.5);
    }

    #[test]
    fn statfeat_dimension_and_standardization() {
        let values = Array3::from_shape_fn((6, 12, 3), |(i, t, c)| ((i + 1) as f64 * t as f64 * 0.3 + c as f64).sin());
        let train = ds(values);
        let fitted = FittedEmbedder::fit(EmbedderKind::StatFeat, &train).unwrap();
        let e = fitted.embed(&train).unwrap();
        assert_eq!(e.dim(), 24 * 3);
        for col in e.vectors.axis_iter(Axis(1)) {
            let v = col.to_vec();
            let m = mean(&v);
            let s = variance_pop(&v).sqrt();
            // Zero-variance columns pass through unstandardized.
            assert!(s < 1e-9 || ((s - 1.0).abs() < 1e-9 && m.abs() < 1e-9));
        }
    }

    #[test]
    fn summary_statistics_are_leading_descriptors() {
        let values = Array3::from_shape_fn((2, 10, 2), |(i, t, c)| (i * 3 + t * t + c) as f64);
        let train = ds(values);
        let s = summary_statistics(&train).unwrap();
        let full = raw_descriptors(&train).unwrap();
        assert_eq!(s.ncols(), 14);
        assert_eq!(s[[1, 7]], full[[1, 24]]);
        assert_eq!(s[[0, 6]], full[[0, 6]]);
    }
}
