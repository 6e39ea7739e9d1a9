//! k-nearest-neighbor manifold measures: improved precision/recall, density and coverage.

use ndarray::ArrayView2;

use super::MeasureInput;
use crate::error::{invalid, Result};
use crate::kernels::neighbors::{euclidean, knn_radius};

pub const MANIFOLD_K: usize = 5;

fn check(real: ArrayView2<f64>, synth: ArrayView2<f64>, k: usize) -> Result<()> {
    if real.nrows() <= k || synth.nrows() == 0 {
        return Err(invalid(format!(
            "manifold measures need more than k={k} real instances"
        )));
    }
    Ok(())
}

/// Fraction of `queries` inside at least one ball `B(center, radius)`.
fn fraction_in_any_ball(queries: ArrayView2<f64>, centers: ArrayView2<f64>, radii: &[f64]) -> f64 {
    let hits = queries
        .rows()
        .into_iter()
        .filter(|q| {
            centers
                .rows()
                .into_iter()
                .zip(radii)
                .any(|(c, &r)| euclidean(*q, c) <= r)
        })
        .count();
    hits as f64 / queries.nrows() as f64
}

pub fn precision_at(real: ArrayView2<f64>, synth: ArrayView2<f64>, k: usize) -> Result<f64> {
    check(real, synth, k)?;
    let radii = knn_radius(real, k)?;
    Ok(fraction_in_any_ball(synth, real, &radii))
}

pub fn recall_at(real: ArrayView2<f64>, synth: ArrayView2<f64>, k: usize) -> Result<f64> {
    check(synth, real, k)?;
    let radii = knn_radius(synth, k)?;
    Ok(fraction_in_any_ball(real, synth, &radii))
}

pub fn density_at(real: ArrayView2<f64>, synth: ArrayView2<f64>, k: usize) -> Result<f64> {
    check(real, synth, k)?;
    let radii = knn_radius(real, k)?;
    let mut count = 0usize;
    for y in synth.rows() {
        for (x, &r) in real.rows().into_iter().zip(&radii) {
            if euclidean(y, x) <= r {
                count += 1;
            }
        }
    }
    Ok(count as f64 / (k * synth.nrows()) as f64)
}

pub fn coverage_at(real: ArrayView2<f64>, synth: ArrayView2<f64>, k: usize) -> Result<f64> {
    check(real, synth, k)?;
    let radii = knn_radius(real, k)?;
    let covered = real
        .rows()
        .into_iter()
        .zip(&radii)
        .filter(|(x, &r)| synth.rows().into_iter().any(|y| euclidean(*x, y) <= r))
        .count();
    Ok(covered as f64 / real.nrows() as f64)
}

pub fn improved_precision(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("improved_precision")?;
    precision_at(e.train.vectors.view(), e.synth.vectors.view(), MANIFOLD_K)
}

pub fn improved_recall(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("improved_recall")?;
    recall_at(e.train.vectors.view(), e.synth.vectors.view(), MANIFOLD_K)
}

pub fn density(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("Density")?;
    density_at(e.train.vectors.view(), e.synth.vectors.view(), MANIFOLD_K)
}

pub fn coverage(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("Coverage")?;
    coverage_at(e.train.vectors.view(), e.synth.vectors.view(), MANIFOLD_K)
}
