//! Single-level order-2 Daubechies transform with symmetric (half-sample) boundary extension.

use super::{synthetic_like, TransformContext};
use crate::error::{Error, Result};
use crate::model::Dataset;

const TAPS: usize = 4;

/// Reconstruction low-pass filter.
fn rec_lo() -> [f64; TAPS] {
    let s3 = 3f64.sqrt();
    let norm = 4.0 * 2f64.sqrt();
    [(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm, (1.0 - s3) / norm]
}

fn rec_hi() -> [f64; TAPS] {
    let h = rec_lo();
    [h[3], -h[2], h[1], -h[0]]
}

fn reversed(f: [f64; TAPS]) -> [f64; TAPS] {
    [f[3], f[2], f[1], f[0]]
}

/// Sample `i` of `x` under symmetric extension (`x1 x0 | x0 x1 … xn | xn xn−1`).
fn extended(x: &[f64], i: isize) -> f64 {
    let n = x.len() as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -1 - i;
        }
        if i >= n {
            i = 2 * n - 1 - i;
        }
    }
    x[i as usize]
}

/// Forward transform into `(approximation, detail)`, each of length `⌊(len + 3) / 2⌋`.
pub fn dwt(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (reversed(rec_lo()), reversed(rec_hi()));
    let out_len = (x.len() + TAPS - 1) / 2;
    let mut a = vec![0.0; out_len];
    let mut d = vec![0.0; out_len];
    for o in 0..out_len {
        for j in 0..TAPS {
            let v = extended(x, 1 + 2 * o as isize - j as isize);
            a[o] += lo[j] * v;
            d[o] += hi[j] * v;
        }
    }
    (a, d)
}

/// Inverse of [`dwt`]; returns `2 · len(a) − 2` samples (one more than the input for odd lengths).
pub fn idwt(a: &[f64], d: &[f64]) -> Vec<f64> {
    let (lo, hi) = (rec_lo(), rec_hi());
    let out_len = (2 * a.len()).saturating_sub(TAPS - 2);
    let mut y = vec![0.0; out_len];
    for (t, slot) in y.iter_mut().enumerate() {
        // Valid part of the full convolution of the upsampled coefficients, offset by TAPS/2.
        let m = t + TAPS / 2;
        for k in (m.saturating_sub(TAPS - 1)).div_ceil(2)..=(m / 2).min(a.len() - 1) {
            let f = m - 2 * k;
            *slot += a[k] * lo[f] + d[k] * hi[f];
        }
    }
    y
}

/// Scales the approximation coefficients of `series` by `factor` and inverts.
pub fn rescale_approximation(series: &[f64], factor: f64) -> Vec<f64> {
    let (mut a, d) = dwt(series);
    for v in &mut a {
        *v *= factor;
    }
    let mut y = idwt(&a, &d);
    y.truncate(series.len());
    y
}

/// Multiplies the approximation coefficients by `1 − κ` per channel and inverts the transform.
pub fn wavelet_transform(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let (n, l, d) = input.shape();
    if l < TAPS {
        return Err(Error::Inapplicable("wavelet_transform requires l >= 4".into()));
    }
    let factor = 1.0 - ctx.kappa;
    let mut out = synthetic_like(input);
    for i in 0..n {
        for c in 0..d {
            let y = rescale_approximation(&input.channel(i, c), factor);
            for (t, v) in y.into_iter().enumerate() {
                out.values_mut()[[i, t, c]] = v;
            }
        }
    }
    Ok(out)
}
