//! α-precision, β-recall and authenticity in the embedding space.

use ndarray::{Array1, ArrayView2, Axis};

use super::manifold::MANIFOLD_K;
use super::MeasureInput;
use crate::error::{invalid, Result};
use crate::kernels::neighbors::{euclidean, knn_radius, nearest};
use crate::kernels::stats::quantile_sorted;

/// Levels 0.05, 0.10, ..., 0.95.
pub const ALAA_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75,
    0.80, 0.85, 0.90, 0.95,
];
pub const ALAA_MIN_N: usize = 20;

fn check(real: ArrayView2<f64>, synth: ArrayView2<f64>) -> Result<()> {
    if real.nrows() < ALAA_MIN_N || synth.nrows() < ALAA_MIN_N {
        return Err(invalid(format!(
            "alpha/beta measures need at least {ALAA_MIN_N} instances per side"
        )));
    }
    Ok(())
}

fn center(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("non-empty")
}

fn distances_to(x: ArrayView2<f64>, c: &Array1<f64>) -> Vec<f64> {
    x.rows().into_iter().map(|r| euclidean(r, c.view())).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// `1 − mean_α |α − P(synthetic inside the real α-ball)|`, balls centered at the real mean.
pub fn alpha_precision_of(real: ArrayView2<f64>, synth: ArrayView2<f64>) -> Result<f64> {
    check(real, synth)?;
    let c = center(real);
    let real_d = sorted(distances_to(real, &c));
    let synth_d = distances_to(synth, &c);
    let dev: f64 = ALAA_GRID
        .iter()
        .map(|&a| {
            let r = quantile_sorted(&real_d, a);
            let inside = synth_d.iter().filter(|&&d| d <= r).count() as f64 / synth_d.len() as f64;
            (a - inside).abs()
        })
        .sum();
    Ok(1.0 - dev / ALAA_GRID.len() as f64)
}

/// `1 − mean_β |β − P(real point covered by the β-typical synthetic support)|`.
///
/// A real point is covered when its nearest synthetic neighbor is β-typical (inside the
/// β-quantile ball around the synthetic mean) and lies within the point's real k-NN radius.
pub fn beta_recall_of(real: ArrayView2<f64>, synth: ArrayView2<f64>) -> Result<f64> {
    check(real, synth)?;
    let c = center(synth);
    let synth_d = distances_to(synth, &c);
    let synth_sorted = sorted(synth_d.clone());
    let radii = knn_radius(real, MANIFOLD_K)?;
    let nn = nearest(real, synth, false);
    let dev: f64 = ALAA_GRID
        .iter()
        .map(|&b| {
            let r = quantile_sorted(&synth_sorted, b);
            let covered = nn
                .iter()
                .zip(&radii)
                .filter(|((j, d), &rad)| synth_d[*j] <= r && *d <= rad)
                .count() as f64
                / real.nrows() as f64;
            (b - covered).abs()
        })
        .sum();
    Ok(1.0 - dev / ALAA_GRID.len() as f64)
}

/// Fraction of synthetic points farther from their nearest real point than that real point is
/// from its own nearest real neighbor.
pub fn authenticity_of(real: ArrayView2<f64>, synth: ArrayView2<f64>) -> Result<f64> {
    check(real, synth)?;
    let real_nn = nearest(real, real, true);
    let synth_nn = nearest(synth, real, false);
    let authentic = synth_nn
        .iter()
        .filter(|(j, d)| real_nn[*j].1 < *d)
        .count();
    Ok(authentic as f64 / synth.nrows() as f64)
}

pub fn alpha_precision(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("alpha_precision")?;
    alpha_precision_of(e.train.vectors.view(), e.synth.vectors.view())
}

pub fn beta_recall(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("beta_recall")?;
    beta_recall_of(e.train.vectors.view(), e.synth.vectors.view())
}

pub fn authenticity(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("authenticity")?;
    authenticity_of(e.train.vectors.view(), e.synth.vectors.view())
}
