//! Seasonal-trend decomposition by LOESS and the component-rescaling transformation.

use rand::Rng;

use super::TransformContext;
use crate::error::{Error, Result};
use crate::kernels::spectral::dominant_period;
use crate::model::{Dataset, TransformKind};

pub const SEASONAL_WINDOW: usize = 7;
const INNER_PASSES: usize = 2;

fn next_odd(x: f64) -> usize {
    let k = x.ceil().max(1.0) as usize;
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

/// Locally weighted linear fit of `(xs, ys)` evaluated at `x0`, using the `q` nearest points.
fn loess_at(xs: &[f64], ys: &[f64], q: usize, x0: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    let q_eff = q.min(n);
    // xs are sorted: slide a window of q_eff points to be as centered on x0 as possible.
    let mut lo = match xs.binary_search_by(|v| v.total_cmp(&x0)) {
        Ok(i) | Err(i) => i.saturating_sub(q_eff / 2),
    };
    lo = lo.min(n - q_eff);
    while lo > 0 && (x0 - xs[lo - 1]) < (xs[lo + q_eff - 1] - x0) {
        lo -= 1;
    }
    while lo + q_eff < n && (xs[lo + q_eff] - x0) < (x0 - xs[lo]) {
        lo += 1;
    }
    let hi = lo + q_eff;
    let mut h = (x0 - xs[lo]).abs().max((xs[hi - 1] - x0).abs());
    if q > n {
        h += (q - n) as f64 / 2.0;
    }
    let h = h.max(1e-12) * 1.000_001;
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in lo..hi {
        let r = ((xs[k] - x0).abs() / h).min(1.0);
        let w = (1.0 - r.powi(3)).powi(3);
        sw += w;
        sx += w * xs[k];
        sy += w * ys[k];
        sxx += w * xs[k] * xs[k];
        sxy += w * xs[k] * ys[k];
    }
    if sw <= 0.0 {
        return ys[lo];
    }
    let mx = sx / sw;
    let my = sy / sw;
    let var = sxx / sw - mx * mx;
    if var <= 1e-12 * (1.0 + mx * mx) {
        return my;
    }
    let slope = (sxy / sw - mx * my) / var;
    my + slope * (x0 - mx)
}

fn loess_series(ys: &[f64], q: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    xs.iter().map(|&x| loess_at(&xs, ys, q, x)).collect()
}

fn moving_avg(x: &[f64], w: usize) -> Vec<f64> {
    if x.len() < w {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(x.len() - w + 1);
    let mut acc: f64 = x[..w].iter().sum();
    out.push(acc / w as f64);
    for i in w..x.len() {
        acc += x[i] - x[i - w];
        out.push(acc / w as f64);
    }
    out
}

/// Additive components of one series; `residual = series − seasonal − trend` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub seasonal: Vec<f64>,
    pub trend: Vec<f64>,
    pub residual: Vec<f64>,
}

pub fn trend_window(period: usize) -> usize {
    next_odd(1.5 * period as f64)
}

/// STL inner loop (no robustness iterations).
pub fn decompose(y: &[f64], period: usize) -> Result<Decomposition> {
    let n = y.len();
    if period < 2 || n < 2 * period {
        return Err(Error::Inapplicable(format!(
            "series of length {n} too short for seasonal period {period}"
        )));
    }
    let nl = next_odd(period as f64);
    let nt = trend_window(period);
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    for _ in 0..INNER_PASSES {
        let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
        // Cycle-subseries smoothing, extended by one cycle on each side.
        let mut cycle = vec![0.0; n + 2 * period];
        for phase in 0..period {
            let idx: Vec<usize> = (phase..n).step_by(period).collect();
            let xs: Vec<f64> = (0..idx.len()).map(|k| k as f64).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
            for k in -1..=(idx.len() as isize) {
                let v = loess_at(&xs, &ys, SEASONAL_WINDOW, k as f64);
                let pos = (k + 1) as usize * period + phase;
                if pos < cycle.len() {
                    cycle[pos] = v;
                }
            }
        }
        // Low-pass filter of the cycle series.
        let lp = moving_avg(&moving_avg(&moving_avg(&cycle, period), period), 3);
        let lp = loess_series(&lp, nl);
        for i in 0..n {
            seasonal[i] = cycle[period + i] - lp.get(i).copied().unwrap_or(0.0);
        }
        let deseason: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
        trend = loess_series(&deseason, nt);
    }
    let residual = (0..n).map(|i| y[i] - seasonal[i] - trend[i]).collect();
    Ok(Decomposition {
        seasonal,
        trend,
        residual,
    })
}

fn detrend(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mt = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - mt;
        sty += dt * (v - my);
        stt += dt * dt;
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    y.iter()
        .enumerate()
        .map(|(t, v)| v - my - slope * (t as f64 - mt))
        .collect()
}

/// Seasonal period of a channel: dominant FFT period of the linearly detrended series,
/// rounded and clamped to `[2, l/2]`.
pub fn channel_period(series: &[f64]) -> usize {
    let max = (series.len() / 2).max(2);
    dominant_period(&detrend(series))
        .map(|p| (p.round() as usize).clamp(2, max))
        .unwrap_or(2)
}

/// Recombines `(κu₁+1)s + (κu₂+1)t + (κu₃+1)r` with `u ~ U[−1, 1]` per (instance, channel).
pub fn stl_transform(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let (n, l, d) = input.shape();
    if l < 4 {
        return Err(Error::Inapplicable("stl_decomposition requires l >= 4".into()));
    }
    let mut rng = ctx.stream(TransformKind::Stl, 0);
    let mut out = super::synthetic_like(input);
    for i in 0..n {
        for c in 0..d {
            let u: [f64; 3] = [
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            ];
            let series = input.channel(i, c);
            let parts = decompose(&series, channel_period(&series))?;
            let [a, b, r] = u.map(|v| ctx.kappa * v + 1.0);
            for t in 0..l {
                out.values_mut()[[i, t, c]] =
                    a * parts.seasonal[t] + b * parts.trend[t] + r * parts.residual[t];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use ndarray::Array3;

    fn series(l: usize) -> Vec<f64> {
        (0..l)
            .map(|t| {
                let t = t as f64;
                0.05 * t + (2.0 * std::f64::consts::PI * t / 12.0).sin() + 0.1 * (t * 1.7).cos()
            })
            .collect()
    }

    #[test]
    fn reconstruction_identity() {
        let y = series(96);
        let parts = decompose(&y, 12).unwrap();
        for t in 0..y.len() {
            let back = parts.seasonal[t] + parts.trend[t] + parts.residual[t];
            assert!((back - y[t]).abs() <= 1e-9 * y[t].abs().max(1.0));
        }
        // The trend should carry the slope, the season the 12-step cycle.
        assert!(parts.trend[90] > parts.trend[5]);
        let amp = parts.seasonal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(amp > 0.5, "seasonal amplitude {amp}");
    }

    #[test]
    fn windows_and_period() {
        assert_eq!(trend_window(12), 19);
        assert_eq!(trend_window(2), 3);
        assert_eq!(channel_period(&series(96)), 12);
        assert_eq!(channel_period(&[1.0; 10]), 2);
        assert!(decompose(&series(10), 6).is_err());
    }

    #[test]
    fn identity_and_scaling() {
        let values = Array3::from_shape_fn((3, 48, 2), |(i, t, c)| {
            (t as f64 / 4.0 + i as f64 + c as f64).sin() + 0.02 * t as f64
        });
        let ds = Dataset::new(values, None, "s", Role::Train).unwrap();
        let ctx0 = TransformContext::new(None, 0.0, 5);
        let out = stl_transform(&ds, &ctx0).unwrap();
        for (a, b) in out.values().iter().zip(ds.values().iter()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        // Equal multipliers reduce to pure scaling because the components add up to the input.
        let y = series(48);
        let parts = decompose(&y, channel_period(&y)).unwrap();
        let m = 1.0 + 0.7 * -0.4;
        for t in 0..48 {
            let v = m * parts.seasonal[t] + m * parts.trend[t] + m * parts.residual[t];
            assert!((v - m * y[t]).abs() < 1e-9);
        }
    }
}
