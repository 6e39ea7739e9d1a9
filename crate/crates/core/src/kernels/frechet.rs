//! Fréchet distance between Gaussians.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`, computed through `√Σ₁ Σ₂ √Σ₁`.
pub fn frechet_gaussian(
    mu1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mu2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || cov1.shape() != (d, d) || cov2.shape() != (d, d) {
        return Err(invalid("Fréchet distance operands have mismatched dimensions"));
    }
    let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
    if !finite(cov1) || !finite(cov2) || mu1.iter().chain(mu2.iter()).any(|v| !v.is_finite()) {
        return Err(invalid("Fréchet distance of non-finite input"));
    }
    let s1 = sqrtm_psd(cov1);
    let inner = &s1 * cov2 * &s1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let diff = (mu1 - mu2).norm_squared();
    Ok((diff + cov1.trace() + cov2.trace() - 2.0 * tr_sqrt).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one(mu: f64, var: f64) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::from_element(1, mu), DMatrix::from_element(1, 1, var))
    }

    #[test]
    fn closed_form_1d() {
        let (m1, c1) = one(0.0, 1.0);
        let (m2, c2) = one(1.0, 1.0);
        assert_abs_diff_eq!(frechet_gaussian(&m1, &c1, &m2, &c2).unwrap(), 1.0, epsilon = 1e-12);
        let (m3, c3) = one(0.0, 4.0);
        // (σ₁ − σ₂)² = (1 − 2)²
        assert_abs_diff_eq!(frechet_gaussian(&m1, &c1, &m3, &c3).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(frechet_gaussian(&m1, &c1, &m1, &c1).unwrap(), 0.0);
    }

    #[test]
    fn identical_multivariate_is_zero() {
        let mu = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let d = frechet_gaussian(&mu, &a, &mu, &a).unwrap();
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn rejects_non_finite() {
        let (m1, c1) = one(f64::NAN, 1.0);
        let (m2, c2) = one(0.0, 1.0);
        assert!(frechet_gaussian(&m1, &c1, &m2, &c2).is_err());
    }
}
