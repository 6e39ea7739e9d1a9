//! Correlation-structure measures: autocorrelation, spatial and temporal correlation, FBCA.

use ndarray::Array2;

use super::{failures, subsample, MeasureInput, MeasureOutput};
use crate::error::{Error, Result};
use crate::kernels::spectral::{autocorr_fft, power_spectrum};
use crate::kernels::stats::{kendall_tau, mean, pearson, spearman, variance_pop};
use crate::model::{Dataset, Score};

/// Number of spectral peaks tracked by the temporal correlation measure.
pub const TEMPORAL_PEAKS: usize = 3;

/// Per channel, the instance-averaged autocorrelation at lags `1..=⌊l/4⌋`.
fn mean_autocorr(ds: &Dataset) -> Vec<Vec<f64>> {
    let lags = (ds.length() / 4).max(1);
    (0..ds.channels())
        .map(|c| {
            let mut acc = vec![0.0; lags];
            for i in 0..ds.n() {
                let r = autocorr_fft(&ds.channel(i, c), lags);
                for (a, v) in acc.iter_mut().zip(&r[1..]) {
                    *a += v;
                }
            }
            acc.iter().map(|v| v / ds.n() as f64).collect()
        })
        .collect()
}

/// Mean squared difference of the channel × lag autocorrelation matrices.
pub fn auto_corr(input: &MeasureInput) -> Result<f64> {
    let real = mean_autocorr(input.train);
    let synth = mean_autocorr(input.synth);
    let diffs: Vec<f64> = real
        .iter()
        .flatten()
        .zip(synth.iter().flatten())
        .map(|(a, b)| (a - b).powi(2))
        .collect();
    Ok(mean(&diffs))
}

/// Instance-averaged Pearson correlation for every channel pair `(a, b)`, `a < b`.
/// Pairs with a constant channel count as correlation 0; `None` when every channel of every
/// instance is constant.
fn mean_channel_correlation(ds: &Dataset) -> Option<Vec<f64>> {
    let d = ds.channels();
    let mut acc = vec![0.0; d * (d - 1) / 2];
    let mut informative = false;
    for i in 0..ds.n() {
        let chans: Vec<Vec<f64>> = (0..d).map(|c| ds.channel(i, c)).collect();
        informative |= chans.iter().any(|c| variance_pop(c) > 0.0);
        let mut k = 0;
        for a in 0..d {
            for b in a + 1..d {
                acc[k] += pearson(&chans[a], &chans[b]);
                k += 1;
            }
        }
    }
    informative.then(|| acc.iter().map(|v| v / ds.n() as f64).collect())
}

/// Mean over channel pairs of the squared difference of mean inter-channel correlations.
pub fn spatial(input: &MeasureInput) -> Result<f64> {
    if input.train.channels() < 2 {
        return Err(Error::Inapplicable("spatial correlation requires d>1".into()));
    }
    let fail = || Error::Measure(failures::SPATIAL.to_string());
    let real = mean_channel_correlation(&subsample(input.train, input.seed)).ok_or_else(fail)?;
    let synth = mean_channel_correlation(&subsample(input.synth, input.seed)).ok_or_else(fail)?;
    let diffs: Vec<f64> = real.iter().zip(&synth).map(|(a, b)| (a - b).powi(2)).collect();
    Ok(mean(&diffs))
}

/// Frequency bins of the `TEMPORAL_PEAKS` largest local maxima of the mean power spectrum.
fn peak_bins(ds: &Dataset, c: usize) -> Vec<usize> {
    let spectra: Vec<Vec<f64>> = (0..ds.n()).map(|i| power_spectrum(&ds.channel(i, c))).collect();
    let bins = spectra[0].len();
    let avg: Vec<f64> = (0..bins)
        .map(|k| spectra.iter().map(|s| s[k]).sum::<f64>() / ds.n() as f64)
        .collect();
    let mut candidates: Vec<usize> = (1..bins)
        .filter(|&k| avg[k] >= avg[k - 1] && (k + 1 >= bins || avg[k] >= avg[k + 1]))
        .collect();
    if candidates.len() < TEMPORAL_PEAKS {
        candidates = (1..bins).collect();
    }
    candidates.sort_by(|&a, &b| avg[b].total_cmp(&avg[a]).then(a.cmp(&b)));
    candidates.truncate(TEMPORAL_PEAKS);
    candidates.sort_unstable();
    candidates
}

/// Pairwise correlations, across instances, of the spectral power at the given bins.
fn peak_power_correlations(ds: &Dataset, c: usize, bins: &[usize]) -> Vec<f64> {
    let powers: Vec<Vec<f64>> = bins
        .iter()
        .map(|&k| {
            (0..ds.n())
                .map(|i| power_spectrum(&ds.channel(i, c)).get(k).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for a in 0..powers.len() {
        for b in a + 1..powers.len() {
            out.push(pearson(&powers[a], &powers[b]));
        }
    }
    out
}

/// Per channel, the correlations across instances between the powers at the three dominant
/// spectral peaks of the real data; mean squared real-vs-synthetic difference.
pub fn temporal(input: &MeasureInput) -> Result<f64> {
    let real = subsample(input.train, input.seed);
    let synth = subsample(input.synth, input.seed);
    if real.length() < 2 * TEMPORAL_PEAKS + 2 {
        return Err(Error::Inapplicable(
            "temporal correlation needs at least 8 time steps".into(),
        ));
    }
    let mut diffs = Vec::new();
    for c in 0..real.channels() {
        let bins = peak_bins(&real, c);
        let r = peak_power_correlations(&real, c, &bins);
        let s = peak_power_correlations(&synth, c, &bins);
        diffs.extend(r.iter().zip(&s).map(|(a, b)| (a - b).powi(2)));
    }
    Ok(mean(&diffs))
}

/// Feature × feature Pearson correlation matrix (rows are instances).
fn feature_correlation(x: &Array2<f64>) -> Array2<f64> {
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let p = cols.len();
    let mut out = Array2::eye(p);
    for a in 0..p {
        for b in a + 1..p {
            let r = pearson(&cols[a], &cols[b]);
            out[[a, b]] = r;
            out[[b, a]] = r;
        }
    }
    out
}

/// The five FBCA statistics between the real and synthetic feature-correlation matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbcaStats {
    pub mae: f64,
    pub mse: f64,
    pub frobenius: f64,
    pub kendall: f64,
    pub spearman: f64,
}

impl FbcaStats {
    pub fn between(real: &Array2<f64>, synth: &Array2<f64>) -> Self {
        let diff: Vec<f64> = real.iter().zip(synth.iter()).map(|(a, b)| a - b).collect();
        let mae = mean(&diff.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let sq: Vec<f64> = diff.iter().map(|v| v * v).collect();
        let mse = mean(&sq);
        let frobenius = sq.iter().sum::<f64>().sqrt();
        let upper = |m: &Array2<f64>| {
            let mut v = Vec::new();
            for a in 0..m.nrows() {
                for b in a + 1..m.ncols() {
                    v.push(m[[a, b]]);
                }
            }
            v
        };
        let (ru, su) = (upper(real), upper(synth));
        let (kendall, spearman) = if ru == su {
            (1.0, 1.0)
        } else {
            (kendall_tau(&ru, &su), spearman(&ru, &su))
        };
        Self {
            mae,
            mse,
            frobenius,
            kendall,
            spearman,
        }
    }

    /// `mean(MAE, MSE, Frobenius, 1 − τ, 1 − ρ)`; 0 for identical matrices.
    pub fn reduced(&self) -> f64 {
        (self.mae + self.mse + self.frobenius + (1.0 - self.kendall) + (1.0 - self.spearman)) / 5.0
    }

    pub fn into_output(self) -> MeasureOutput {
        MeasureOutput {
            score: Score::Real(self.reduced()),
            details: Default::default(),
        }
        .with_detail("mae", self.mae)
        .with_detail("mse", self.mse)
        .with_detail("frobenius", self.frobenius)
        .with_detail("kendall", self.kendall)
        .with_detail("spearman", self.spearman)
    }
}

pub fn fbca(input: &MeasureInput) -> Result<FbcaStats> {
    let e = input.embedded("fbca")?;
    Ok(FbcaStats::between(
        &feature_correlation(&e.train.vectors),
        &feature_correlation(&e.synth.vectors),
    ))
}
