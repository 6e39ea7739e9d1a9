//! Exact nearest-neighbor queries in Euclidean space.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{invalid, Result};

/// Radius substituted when every neighbor coincides with the point.
pub const MIN_RADIUS: f64 = 1e-12;

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Distance from each point to its `k`-th nearest other point.
///
/// A zero radius (duplicates) is replaced by the point's smallest positive distance, else [`MIN_RADIUS`].
pub fn knn_radius(points: ArrayView2<f64>, k: usize) -> Result<Vec<f64>> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(invalid(format!("k = {k} needs more than k points (n = {n})")));
    }
    let mut radii = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        for j in 0..n {
            if j != i {
                dists.push(euclidean(points.row(i), points.row(j)));
            }
        }
        let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
        let mut r = *kth;
        if r == 0.0 {
            r = dists
                .iter()
                .copied()
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min);
            if !r.is_finite() {
                r = MIN_RADIUS;
            }
        }
        radii.push(r);
    }
    Ok(radii)
}

/// For every query row, the index and distance of the nearest reference row.
///
/// With `exclude_same_index`, row `i` of the query never matches row `i` of the reference
/// (used when both are the same set).
pub fn nearest(
    query: ArrayView2<f64>,
    reference: ArrayView2<f64>,
    exclude_same_index: bool,
) -> Vec<(usize, f64)> {
    (0..query.nrows())
        .map(|i| {
            let mut best = (usize::MAX, f64::INFINITY);
            for j in 0..reference.nrows() {
                if exclude_same_index && i == j {
                    continue;
                }
                let d = euclidean(query.row(i), reference.row(j));
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}
