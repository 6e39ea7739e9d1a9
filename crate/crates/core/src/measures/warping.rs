//! DTW-based distances (ICD, INND, ONND) and the approximate-entropy measure, all on
//! 100-instance subsamples.

use super::{subsample, MeasureInput};
use crate::error::Result;
use crate::kernels::dtw::dtw;
use crate::kernels::stats::approx_entropy_default;
use crate::model::Dataset;

/// Sum of DTW over all ordered pairs of the synthetic subsample divided by its size squared.
pub fn icd(input: &MeasureInput) -> Result<f64> {
    let s = subsample(input.synth, input.seed);
    let n = s.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += 2.0 * dtw(s.instance(i), s.instance(j))?;
        }
    }
    Ok(total / (n * n) as f64)
}

/// Mean over `from` of the DTW distance to the nearest instance of `to`.
fn mean_nearest(from: &Dataset, to: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..from.n() {
        let mut best = f64::INFINITY;
        for j in 0..to.n() {
            best = best.min(dtw(from.instance(i), to.instance(j))?);
            if best == 0.0 {
                break;
            }
        }
        total += best;
    }
    Ok(total / from.n() as f64)
}

/// Incoming nearest-neighbor distance: synthetic to nearest real.
pub fn innd(input: &MeasureInput) -> Result<f64> {
    let real = subsample(input.train, input.seed);
    let synth = subsample(input.synth, input.seed);
    mean_nearest(&synth, &real)
}

/// Outgoing nearest-neighbor distance: real to nearest synthetic.
pub fn onnd(input: &MeasureInput) -> Result<f64> {
    let real = subsample(input.train, input.seed);
    let synth = subsample(input.synth, input.seed);
    mean_nearest(&real, &synth)
}

fn channel_apen(ds: &Dataset) -> Vec<f64> {
    (0..ds.channels())
        .map(|c| {
            let total: f64 = (0..ds.n())
                .map(|i| approx_entropy_default(&ds.channel(i, c)))
                .sum();
            total / ds.n() as f64
        })
        .collect()
}

/// Mean over channels of the squared difference of instance-averaged ApEn (m = 2, r = 0.2σ).
pub fn ap_en(input: &MeasureInput) -> Result<f64> {
    let real = channel_apen(&subsample(input.train, input.seed));
    let synth = channel_apen(&subsample(input.synth, input.seed));
    Ok(real
        .iter()
        .zip(&synth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / real.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::sine;
    use super::*;
    use crate::model::Role;
    use ndarray::Array3;
    use rand::Rng;

    fn ds(values: Array3<f64>) -> Dataset {
        Dataset::new(values, None, "w", Role::Train).unwrap()
    }

    #[test]
    fn identical_sets_give_zero() {
        let d = sine(150, 2);
        let input = MeasureInput::new(&d, &d, 4);
        assert_eq!(innd(&input).unwrap(), 0.0);
        assert_eq!(onnd(&input).unwrap(), 0.0);
        assert_eq!(ap_en(&input).unwrap(), 0.0);
        let same = ds(Array3::from_shape_fn((6, 5, 1), |(_, t, _)| t as f64));
        assert_eq!(icd(&MeasureInput::new(&same, &same, 1)).unwrap(), 0.0);
    }

    #[test]
    fn toy_sets_match_double_loop() {
        let a = ds(Array3::from_shape_vec((3, 3, 1), vec![0., 1., 2., 1., 1., 1., 3., 0., 3.]).unwrap());
        let b = ds(Array3::from_shape_vec((3, 3, 1), vec![2., 2., 2., 0., 0., 1., 1., 2., 3.]).unwrap());
        let input = MeasureInput::new(&a, &b, 1);
        let m = |x: &Dataset, i: usize, y: &Dataset, j: usize| dtw(x.instance(i), y.instance(j)).unwrap();
        let mut icd_ref = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                icd_ref += m(&b, i, &b, j);
            }
        }
        assert!((icd(&input).unwrap() - icd_ref / 9.0).abs() < 1e-12);
        let innd_ref: f64 = (0..3)
            .map(|i| (0..3).map(|j| m(&b, i, &a, j)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / 3.0;
        let onnd_ref: f64 = (0..3)
            .map(|i| (0..3).map(|j| m(&a, i, &b, j)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / 3.0;
        assert!((innd(&input).unwrap() - innd_ref).abs() < 1e-12);
        assert!((onnd(&input).unwrap() - onnd_ref).abs() < 1e-12);
    }

    #[test]
    fn apen_separates_sine_from_noise() {
        let sine_ds = ds(Array3::from_shape_fn((10, 64, 1), |(i, t, _)| {
            (t as f64 * 0.4 + i as f64).sin()
        }));
        let mut rng = crate::rng::stream(5, "noise", 0);
        let noise = ds(Array3::from_shape_fn((10, 64, 1), |_| rng.random::<f64>()));
        let ab = ap_en(&MeasureInput::new(&sine_ds, &noise, 1)).unwrap();
        let ba = ap_en(&MeasureInput::new(&noise, &sine_ds, 1)).unwrap();
        assert!(ab > 0.0);
        assert_eq!(ab, ba);
        assert!(channel_apen(&noise)[0] > channel_apen(&sine_ds)[0]);
    }
}
