//! Regularized linear models: logistic classifier, ridge regression, and the ridge forecaster.

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid, Error, Result};
use crate::model::Dataset;

pub const LOGISTIC_L2: f64 = 1e-3;
pub const LOGISTIC_TOL: f64 = 1e-6;
pub const RIDGE_L2: f64 = 1e-2;

/// Per-feature z-scoring fitted on training rows; constant features map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Self { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

fn solve_spd(a: Array2<f64>, b: Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let m = DMatrix::from_row_iterator(n, n, a.iter().copied());
    let v = DVector::from_iterator(n, b.iter().copied());
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&v),
        None => m
            .lu()
            .solve(&v)
            .ok_or_else(|| Error::Numerical("singular linear system".into()))?,
    };
    Ok(Array1::from_iter(sol.iter().copied()))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularized binary logistic regression on standardized features, fitted by Newton steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    scaler: Standardizer,
    weights: Array1<f64>,
    bias: f64,
}

impl Logistic {
    pub fn fit(x: ArrayView2<f64>, y: &[bool]) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || y.len() != n {
            return Err(invalid("logistic regression needs one label per row"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("logistic regression on non-finite features"));
        }
        let scaler = Standardizer::fit(x);
        let z = scaler.transform(x);
        let p = z.ncols();
        // Design matrix with a trailing intercept column.
        let mut a = Array2::<f64>::ones((n, p + 1));
        a.slice_mut(s![.., ..p]).assign(&z);
        let target: Array1<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let mut beta = Array1::<f64>::zeros(p + 1);
        let nf = n as f64;
        for _ in 0..100 {
            let eta = a.dot(&beta);
            let prob = eta.mapv(sigmoid);
            let mut grad = a.t().dot(&(&prob - &target)) / nf;
            let wts = prob.mapv(|q| (q * (1.0 - q)).max(1e-12));
            let aw = &a * &wts.mapv(f64::sqrt).insert_axis(Axis(1));
            let mut hess = aw.t().dot(&aw) / nf;
            for j in 0..p {
                grad[j] += LOGISTIC_L2 * beta[j];
                hess[[j, j]] += LOGISTIC_L2;
            }
            hess[[p, p]] += 1e-12;
            let step = solve_spd(hess, grad)?;
            beta -= &step;
            if step.iter().fold(0.0f64, |m, v| m.max(v.abs())) < LOGISTIC_TOL {
                break;
            }
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("logistic regression diverged".into()));
        }
        Ok(Self {
            scaler,
            weights: beta.slice(s![..p]).to_owned(),
            bias: beta[p],
        })
    }

    /// Decision values (log-odds) per row.
    pub fn decision(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.scaler.transform(x).dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.decision(x).mapv(sigmoid)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<bool> {
        self.decision(x).iter().map(|&v| v > 0.0).collect()
    }
}

/// One-vs-rest multi-class wrapper around [`Logistic`].
#[derive(Debug, Clone)]
pub struct OneVsRest {
    classes: Vec<u32>,
    models: Vec<Logistic>,
}

impl OneVsRest {
    pub fn fit(x: ArrayView2<f64>, y: &[u32]) -> Result<Self> {
        let mut classes: Vec<u32> = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.is_empty() {
            return Err(invalid("classifier needs labeled rows"));
        }
        let models = if classes.len() == 1 {
            Vec::new()
        } else {
            classes
                .iter()
                .map(|&c| {
                    let target: Vec<bool> = y.iter().map(|&v| v == c).collect();
                    Logistic::fit(x, &target)
                })
                .collect::<Result<_>>()?
        };
        Ok(Self { classes, models })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<u32> {
        if self.models.is_empty() {
            return vec![self.classes[0]; x.nrows()];
        }
        let scores: Vec<Array1<f64>> = self.models.iter().map(|m| m.decision(x)).collect();
        (0..x.nrows())
            .map(|i| {
                let best = (0..self.classes.len())
                    .max_by(|&a, &b| scores[a][i].total_cmp(&scores[b][i]).then(b.cmp(&a)))
                    .unwrap_or(0);
                self.classes[best]
            })
            .collect()
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, y: &[u32]) -> f64 {
        let pred = self.predict(x);
        let hits = pred.iter().zip(y).filter(|(a, b)| a == b).count();
        hits as f64 / y.len().max(1) as f64
    }
}

/// Ridge regression with an unpenalized intercept. Returns `(weights, intercept)`.
pub fn ridge(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<(Array1<f64>, f64)> {
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(invalid("ridge regression needs one target per row"));
    }
    let xm = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let ym = y.mean().unwrap_or(0.0);
    let xc = &x - &xm;
    let yc = &y - ym;
    let mut gram = xc.t().dot(&xc);
    for j in 0..gram.nrows() {
        gram[[j, j]] += lambda;
    }
    let w = solve_spd(gram, xc.t().dot(&yc))?;
    let b = ym - xm.dot(&w);
    Ok((w, b))
}

/// Per-channel one-step-ahead linear predictor from the previous `window` values.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeForecaster {
    pub window: usize,
    coefs: Vec<(Array1<f64>, f64)>,
}

/// Lagged design for one channel: rows are windows, targets the following value.
fn lagged(ds: &Dataset, channel: usize, window: usize) -> (Array2<f64>, Array1<f64>) {
    let (n, l, _) = ds.shape();
    let rows = n * (l - window);
    let mut x = Array2::<f64>::zeros((rows, window));
    let mut y = Array1::<f64>::zeros(rows);
    let mut r = 0;
    for i in 0..n {
        let series = ds.values().slice(s![i, .., channel]);
        for t in window..l {
            x.row_mut(r).assign(&series.slice(s![t - window..t]));
            y[r] = series[t];
            r += 1;
        }
    }
    (x, y)
}

impl RidgeForecaster {
    pub fn default_window(length: usize) -> usize {
        8.min(length - 1)
    }

    pub fn fit(train: &Dataset, window: usize) -> Result<Self> {
        if window == 0 || window >= train.length() {
            return Err(invalid(format!(
                "forecast window {window} does not fit series of length {}",
                train.length()
            )));
        }
        let coefs = (0..train.channels())
            .map(|c| {
                let (x, y) = lagged(train, c, window);
                ridge(x.view(), y.view(), RIDGE_L2)
            })
            .collect::<Result<_>>()?;
        Ok(Self { window, coefs })
    }

    /// Mean absolute one-step-ahead error over every window of every channel.
    pub fn mae(&self, data: &Dataset) -> Result<f64> {
        if data.channels() != self.coefs.len() || data.length() <= self.window {
            return Err(invalid("forecaster applied to incompatible data"));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for (c, (w, b)) in self.coefs.iter().enumerate() {
            let (x, y) = lagged(data, c, self.window);
            let pred = x.dot(w) + *b;
            total += (&pred - &y).mapv(f64::abs).sum();
            count += y.len();
        }
        Ok(total / count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use ndarray::{array, Array3};

    #[test]
    fn logistic_separable() {
        let x = array![[0.0, 0.1], [0.2, 0.0], [0.1, 0.3], [3.0, 3.1], [3.2, 2.9], [2.8, 3.0]];
        let y = [false, false, false, true, true, true];
        let model = Logistic::fit(x.view(), &y).unwrap();
        assert_eq!(model.predict(x.view()), y.to_vec());
        let p = model.predict_proba(x.view());
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn one_vs_rest_three_classes() {
        let x = array![[0.0], [0.1], [5.0], [5.1], [10.0], [10.1]];
        let y = [0, 0, 1, 1, 2, 2];
        let model = OneVsRest::fit(x.view(), &y).unwrap();
        assert_eq!(model.accuracy(x.view(), &y), 1.0);
    }

    #[test]
    fn ridge_recovers_line() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = array![1.0, 3.0, 5.0, 7.0];
        let (w, b) = ridge(x.view(), y.view(), 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forecaster_exact_on_linear_recurrence() {
        // x_t = 2cos(w) x_{t-1} - x_{t-2} holds exactly for every sinusoid of frequency w.
        let (n, l) = (50, 60);
        let values = Array3::from_shape_fn((n, l, 1), |(i, t, _)| {
            let amp = 1.0 + i as f64 * 0.05;
            let phase = i as f64 * 0.3;
            amp * (0.4 * t as f64 + phase).sin()
        });
        let ds = Dataset::new(values, None, "lin", Role::Train).unwrap();
        let model = RidgeForecaster::fit(&ds, RidgeForecaster::default_window(l)).unwrap();
        let err = model.mae(&ds).unwrap();
        // The fixed ridge penalty shrinks the exact solution slightly; the bias falls with more rows.
        assert!(err < 1e-6, "one-step error {err}");
        let (x, y) = lagged(&ds, 0, 8);
        let (w, b) = ridge(x.view(), y.view(), 0.0).unwrap();
        let exact = (x.dot(&w) + b - &y).mapv(f64::abs).mean().unwrap();
        assert!(exact < 1e-8, "unpenalized one-step error {exact}");
    }
}
