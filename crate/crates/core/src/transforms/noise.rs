//! Value-level perturbations: additive noise, impulse noise, smoothing and channel rotation.

use ndarray::{s, Array1};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{channel_ranges, floor_count, synthetic_like, TransformContext};
use crate::error::{Error, Result};
use crate::model::{Dataset, TransformKind};

/// Adds `N(0, κ/2)` noise in per-channel `[0, 1]`-scaled space.
pub fn gaussian_noise(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let ranges = channel_ranges(input);
    let sd = (ctx.kappa / 2.0).sqrt();
    let mut rng = ctx.stream(TransformKind::GaussianNoise, 0);
    let mut out = synthetic_like(input);
    for ((_, _, c), v) in out.values_mut().indexed_iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        let (lo, hi) = ranges[c];
        if hi > lo {
            // x + range·σ·z equals rescale(scale(x) + σ·z) and is exact at κ = 0.
            *v += (hi - lo) * sd * z;
        }
    }
    Ok(out)
}

/// Replaces each scalar by the channel minimum or maximum with probability κ/2.
pub fn salt_and_pepper(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let ranges = channel_ranges(input);
    let p = ctx.kappa / 2.0;
    let mut rng = ctx.stream(TransformKind::SaltAndPepper, 0);
    let mut out = synthetic_like(input);
    for ((_, _, c), v) in out.values_mut().indexed_iter_mut() {
        let u: f64 = rng.random();
        let pepper: bool = rng.random();
        if u < p {
            let (lo, hi) = ranges[c];
            *v = if pepper { lo } else { hi };
        }
    }
    Ok(out)
}

/// Nearest odd integer to `x` (ties go up).
pub fn round_to_odd(x: f64) -> usize {
    let k = ((x - 1.0) / 2.0).round().max(0.0) as usize;
    2 * k + 1
}

pub fn moving_average_width(length: usize, kappa: f64) -> usize {
    let a = if length >= 30 { 1.0 / 3.0 } else { 1.0 };
    round_to_odd(a * length as f64 * kappa + 1.0)
}

/// Centered moving average; the window shrinks at the series edges.
pub fn moving_average(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let (n, l, d) = input.shape();
    let width = moving_average_width(l, ctx.kappa);
    let mut out = synthetic_like(input);
    if width == 1 {
        return Ok(out);
    }
    let half = width / 2;
    for i in 0..n {
        for c in 0..d {
            let series: Array1<f64> = input.values().slice(s![i, .., c]).to_owned();
            let mut prefix = vec![0.0; l + 1];
            for t in 0..l {
                prefix[t + 1] = prefix[t] + series[t];
            }
            for t in 0..l {
                let lo = t.saturating_sub(half);
                let hi = (t + half + 1).min(l);
                out.values_mut()[[i, t, c]] = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            }
        }
    }
    Ok(out)
}

/// Seam blending weights toward the seam midpoint, nearest sample first.
const SEAM_WEIGHTS: [f64; 3] = [0.75, 0.5, 0.25];

/// Rotates `series` right by `p` (so `[a,b,c,d]` with `p = 1` becomes `[d,a,b,c]`).
pub fn rotate_right(series: &[f64], p: usize) -> Vec<f64> {
    let l = series.len();
    (0..l).map(|t| series[(t + l - p % l) % l]).collect()
}

/// Blends up to three samples on each side of the seam at index `p` toward the seam midpoint.
pub fn smooth_seam(rotated: &mut [f64], p: usize) {
    let l = rotated.len();
    if p == 0 || p >= l {
        return;
    }
    let mid = 0.5 * (rotated[p - 1] + rotated[p]);
    let orig = rotated.to_vec();
    for (k, w) in SEAM_WEIGHTS.iter().enumerate() {
        if let Some(left) = (p - 1).checked_sub(k) {
            rotated[left] = (1.0 - w) * orig[left] + w * mid;
        }
        let right = p + k;
        if right < l {
            rotated[right] = (1.0 - w) * orig[right] + w * mid;
        }
    }
}

/// With probability κ per (instance, channel), rotates the channel by `1 ≤ p ≤ κ(l−1)` positions.
pub fn misalignment(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let (n, l, d) = input.shape();
    if d < 2 {
        return Err(Error::Inapplicable("misalignment requires d>1".into()));
    }
    let max_shift = floor_count(ctx.kappa * (l - 1) as f64).max(1);
    let mut rng = ctx.stream(TransformKind::Misalignment, 0);
    let mut out = synthetic_like(input);
    for i in 0..n {
        for c in 0..d {
            let u: f64 = rng.random();
            let r: f64 = rng.random();
            if u >= ctx.kappa {
                continue;
            }
            let p = (1 + (r * max_shift as f64) as usize).min(max_shift);
            let series: Vec<f64> = input.values().slice(s![i, .., c]).to_vec();
            let mut rotated = rotate_right(&series, p);
            smooth_seam(&mut rotated, p);
            for (t, v) in rotated.into_iter().enumerate() {
                out.values_mut()[[i, t, c]] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::model::Role;
    use ndarray::Array3;

    fn ctx(kappa: f64) -> TransformContext<'static> {
        TransformContext::new(None, kappa, 42)
    }

    fn big() -> Dataset {
        let values = Array3::from_shape_fn((100, 100, 10), |(i, t, c)| {
            ((i * 31 + t * 7 + c * 3) % 97) as f64 / 96.0
        });
        Dataset::new(values, None, "big", Role::Train).unwrap()
    }

    #[test]
    fn gaussian_identity_and_variance() {
        let (train, _) = sine_pair(40, 2);
        assert_eq!(gaussian_noise(&train, &ctx(0.0)).unwrap().values(), train.values());
        let ds = big();
        let out = gaussian_noise(&ds, &ctx(1.0)).unwrap();
        let diff: Vec<f64> = (out.values() - ds.values()).iter().copied().collect();
        // Channels span exactly [0, 1], so scaled and raw differences coincide.
        let var = crate::kernels::stats::variance_pop(&diff);
        assert!((var - 0.5).abs() < 0.025, "variance {var}");
    }

    #[test]
    fn gaussian_constant_channel_untouched() {
        let values = Array3::from_shape_fn((4, 5, 2), |(i, t, c)| if c == 0 { 3.0 } else { (i + t) as f64 });
        let ds = Dataset::new(values, None, "c", Role::Train).unwrap();
        let out = gaussian_noise(&ds, &ctx(1.0)).unwrap();
        assert!(out.values().slice(s![.., .., 0]).iter().all(|&v| v == 3.0));
    }

    #[test]
    fn salt_and_pepper_rate_and_values() {
        let ds = big();
        assert_eq!(salt_and_pepper(&ds, &ctx(0.0)).unwrap().values(), ds.values());
        let out = salt_and_pepper(&ds, &ctx(1.0)).unwrap();
        for (a, b) in out.values().iter().zip(ds.values().iter()) {
            if a != b {
                assert!(*a == 0.0 || *a == 1.0);
            }
        }
        let extreme = out.values().iter().filter(|v| **v == 0.0 || **v == 1.0).count();
        let fraction = extreme as f64 / out.values().len() as f64;
        assert!((fraction - 0.5).abs() < 0.02, "fraction {fraction}");
    }

    #[test]
    fn noise_family_is_monotone() {
        let (train, _) = sine_pair(40, 4);
        for f in [gaussian_noise, salt_and_pepper] {
            let mut prev = 0.0;
            for k in crate::model::kappa_grid(11) {
                let out = f(&train, &ctx(k)).unwrap();
                let mad = (out.values() - train.values()).mapv(f64::abs).mean().unwrap();
                assert!(mad >= prev, "mad {mad} < {prev} at {k}");
                prev = mad;
            }
        }
    }

    #[test]
    fn moving_average_width_and_identity() {
        assert_eq!(moving_average_width(30, 1.0), 11);
        assert_eq!(moving_average_width(30, 0.0), 1);
        assert_eq!(moving_average_width(10, 1.0), 11);
        let (train, _) = sine_pair(20, 1);
        assert_eq!(moving_average(&train, &ctx(0.0)).unwrap().values(), train.values());
        let constant = Dataset::new(Array3::from_elem((3, 30, 1), 2.5), None, "k", Role::Train).unwrap();
        let out = moving_average(&constant, &ctx(0.8)).unwrap();
        assert!(out.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn moving_average_matches_direct_window() {
        let values = Array3::from_shape_fn((2, 31, 1), |(i, t, _)| (t * t + i) as f64);
        let ds = Dataset::new(values, None, "q", Role::Train).unwrap();
        let out = moving_average(&ds, &ctx(0.5)).unwrap();
        let w = moving_average_width(31, 0.5);
        let h = w / 2;
        for t in 0..31usize {
            let lo = t.saturating_sub(h);
            let hi = (t + h).min(30);
            let direct: f64 = (lo..=hi).map(|u| (u * u) as f64).sum::<f64>() / (hi - lo + 1) as f64;
            assert!((out.values()[[0, t, 0]] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_by_one() {
        assert_eq!(rotate_right(&[1.0, 2.0, 3.0, 4.0], 1), vec![4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn seam_is_narrowed() {
        let mut r = rotate_right(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8.0], 4);
        let before = (r[3] - r[4]).abs();
        smooth_seam(&mut r, 4);
        assert!((r[3] - r[4]).abs() < before);
    }

    #[test]
    fn misalignment_probability() {
        let (train, _) = sine_pair(40, 5);
        assert_eq!(misalignment(&train, &ctx(0.0)).unwrap().values(), train.values());
        let out = misalignment(&train, &ctx(1.0)).unwrap();
        for i in 0..train.n() {
            for c in 0..2 {
                assert_ne!(out.channel(i, c), train.channel(i, c));
            }
        }
        let uni = Dataset::new(Array3::zeros((4, 5, 1)), None, "u", Role::Train).unwrap();
        assert!(matches!(misalignment(&uni, &ctx(0.5)), Err(Error::Inapplicable(_))));
    }
}
