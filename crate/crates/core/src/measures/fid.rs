//! Context-FID: Fréchet distance between Gaussian fits of the real and synthetic embeddings.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayView2, Axis};

use super::{failures, MeasureInput};
use crate::error::{Error, Result};
use crate::kernels::frechet::frechet_gaussian;

/// Ridge added to both covariance matrices.
pub const FID_SHRINKAGE: f64 = 1e-3;

/// Mean and (population) covariance with `FID_SHRINKAGE` on the diagonal.
fn gaussian_fit(x: ArrayView2<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x.nrows();
    let d = x.ncols();
    let mean = x
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::InvalidInput("context_fid of an empty set".into()))?;
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let mu = DVector::from_iterator(d, mean.iter().copied());
    let mut sigma = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    for i in 0..d {
        sigma[(i, i)] += FID_SHRINKAGE;
    }
    Ok((mu, sigma))
}

pub fn frechet_of(real: ArrayView2<f64>, synth: ArrayView2<f64>) -> Result<f64> {
    let (m1, c1) = gaussian_fit(real)?;
    let (m2, c2) = gaussian_fit(synth)?;
    let v = frechet_gaussian(&m1, &c1, &m2, &c2)
        .map_err(|_| Error::Measure(failures::CONTEXT_FID.to_string()))?;
    if !v.is_finite() {
        return Err(Error::Measure(failures::CONTEXT_FID.to_string()));
    }
    Ok(v)
}

pub fn context_fid(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("context_fid")?;
    frechet_of(e.train.vectors.view(), e.synth.vectors.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal(n: usize, d: usize, seed: u64, shift: f64) -> Array2<f64> {
        let mut rng = crate::rng::stream(seed, "fid", 0);
        Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal) + shift)
    }

    #[test]
    fn identical_sets() {
        let x = normal(200, 3, 1, 0.0);
        assert!(frechet_of(x.view(), x.view()).unwrap() < 1e-8);
    }

    #[test]
    fn unit_shift_in_one_dimension() {
        // Closed form for N(0,1) vs N(1,1): (0−1)² + 1 + 1 − 2·1 = 1.
        let a = normal(10_000, 1, 2, 0.0);
        let b = normal(10_000, 1, 3, 1.0);
        let v = frechet_of(a.view(), b.view()).unwrap();
        assert!((v - 1.0).abs() < 0.05, "fid {v}");
    }

    #[test]
    fn rotation_invariance() {
        let a = normal(300, 2, 4, 0.0);
        let b = normal(300, 2, 5, 0.5) * 2.0;
        let t = 0.7f64;
        let rot = array![[t.cos(), -t.sin()], [t.sin(), t.cos()]];
        let before = frechet_of(a.view(), b.view()).unwrap();
        let after = frechet_of(a.dot(&rot).view(), b.dot(&rot).view()).unwrap();
        assert!((before - after).abs() < 1e-6);
    }
}
