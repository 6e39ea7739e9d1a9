//! K-means (k-means++ initialization) and diagonal-covariance Gaussian mixtures.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng;

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;
pub const GMM_MAX_ITER: usize = 200;
pub const GMM_VAR_FLOOR: f64 = 1e-6;

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
}

impl KMeans {
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, center) in self.centers.rows().into_iter().enumerate() {
            let d = sq_dist(x, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }

    pub fn predict_all(&self, points: ArrayView2<f64>) -> Vec<usize> {
        points.rows().into_iter().map(|r| self.predict(r)).collect()
    }

    pub fn k(&self) -> usize {
        self.centers.nrows()
    }
}

pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(invalid(format!("k-means with K = {k} on {n} points")));
    }
    let mut rng = rng::stream(seed, "kmeans", k as u64);
    let dim = points.ncols();
    let mut centers = Array2::<f64>::zeros((k, dim));
    centers.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut closest: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, r) in points.rows().into_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(r, centers.row(c)));
        }
    }

    let mut model = KMeans {
        centers,
        assignments: vec![0; n],
    };
    for _ in 0..KMEANS_MAX_ITER {
        model.assignments = model.predict_all(points);
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &c) in model.assignments.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &points.row(i));
            counts[c] += 1;
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let new = if counts[c] > 0 {
                sums.row(c).mapv(|v| v / counts[c] as f64)
            } else {
                // Empty cluster: reseed at the point farthest from its current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), model.centers.row(model.assignments[a]));
                        let db = sq_dist(points.row(b), model.centers.row(model.assignments[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                points.row(far).to_owned()
            };
            shift = shift.max(sq_dist(new.view(), model.centers.row(c)).sqrt());
            model.centers.row_mut(c).assign(&new);
        }
        if shift <= KMEANS_TOL {
            break;
        }
    }
    model.assignments = model.predict_all(points);
    Ok(model)
}

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Array1<f64>,
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Gmm {
    fn component_log_densities(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let dim = x.len() as f64;
        (0..self.weights.len())
            .map(|c| {
                let mut ll = self.weights[c].ln() - 0.5 * dim * (2.0 * std::f64::consts::PI).ln();
                for ((xi, mu), var) in x
                    .iter()
                    .zip(self.means.row(c).iter())
                    .zip(self.variances.row(c).iter())
                {
                    ll -= 0.5 * (var.ln() + (xi - mu).powi(2) / var);
                }
                ll
            })
            .collect()
    }

    pub fn log_likelihood(&self, x: ArrayView1<f64>) -> f64 {
        log_sum_exp(&self.component_log_densities(x))
    }
}

pub fn gmm_fit(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<Gmm> {
    let n = points.nrows();
    let dim = points.ncols();
    if n < k.max(2) {
        return Err(invalid(format!("GMM with K = {k} on {n} points")));
    }
    let init = kmeans(points, k, seed)?;
    let global_var: Array1<f64> = points
        .var_axis(Axis(0), 0.0)
        .mapv(|v| v.max(GMM_VAR_FLOOR));
    let mut model = Gmm {
        weights: Array1::from_elem(k, 1.0 / k as f64),
        means: init.centers.clone(),
        variances: Array2::from_shape_fn((k, dim), |(_, j)| global_var[j]),
    };
    let mut prev_ll = f64::NEG_INFINITY;
    let mut resp = Array2::<f64>::zeros((n, k));
    for _ in 0..GMM_MAX_ITER {
        let mut total_ll = 0.0;
        for i in 0..n {
            let logs = model.component_log_densities(points.row(i));
            let lse = log_sum_exp(&logs);
            total_ll += lse;
            for c in 0..k {
                resp[[i, c]] = (logs[c] - lse).exp();
            }
        }
        if !total_ll.is_finite() {
            return Err(Error::Numerical("mixture log-likelihood is not finite".into()));
        }
        for c in 0..k {
            let nk: f64 = resp.column(c).sum();
            if nk <= 1e-12 {
                model.weights[c] = 1e-12;
                continue;
            }
            model.weights[c] = nk / n as f64;
            for j in 0..dim {
                let mu = (0..n).map(|i| resp[[i, c]] * points[[i, j]]).sum::<f64>() / nk;
                let var = (0..n)
                    .map(|i| resp[[i, c]] * (points[[i, j]] - mu).powi(2))
                    .sum::<f64>()
                    / nk;
                model.means[[c, j]] = mu;
                model.variances[[c, j]] = var.max(GMM_VAR_FLOOR);
            }
        }
        let wsum = model.weights.sum();
        model.weights.mapv_inplace(|w| w / wsum);
        if (total_ll - prev_ll).abs() <= 1e-6 * total_ll.abs().max(1.0) {
            break;
        }
        prev_ll = total_ll;
    }
    Ok(model)
}
