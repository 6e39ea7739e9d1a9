//! Dynamic time warping with a full warping window.

use ndarray::ArrayView2;

use crate::error::{invalid, Result};

fn step_cost(a: &ArrayView2<f64>, b: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j).iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// DTW distance between two `l × d` series; per-step cost is the Euclidean distance across channels.
pub fn dtw(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    let (la, lb) = (a.nrows(), b.nrows());
    if la == 0 || lb == 0 {
        return Err(invalid("DTW of an empty series"));
    }
    if a.ncols() != b.ncols() {
        return Err(invalid("DTW operands differ in channel count"));
    }
    let mut prev = vec![f64::INFINITY; lb + 1];
    let mut cur = vec![f64::INFINITY; lb + 1];
    prev[0] = 0.0;
    for i in 1..=la {
        cur[0] = f64::INFINITY;
        for j in 1..=lb {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = step_cost(&a, &b, i - 1, j - 1) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[lb])
}
