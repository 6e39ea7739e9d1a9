//! Real-vs-synthetic discriminators: logistic and GMM detection (AUC), and the classifier
//! two-sample test.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::{failures, MeasureInput, MeasureOutput};
use crate::error::{Error, Result};
use crate::kernels::cluster::gmm_fit;
use crate::kernels::linear::Logistic;
use crate::kernels::stats::{auc, binomial_test, ALPHA};
use crate::model::Score;
use crate::rng;

/// Minimum instances of either class on either side of the 70/30 split.
pub const DETECTION_MIN_PER_SIDE: usize = 10;
const TRAIN_FRACTION: f64 = 0.7;
/// Mixture components per class, reduced for small classes.
const GMM_COMPONENTS: usize = 3;

/// Seeded 70/30 split of `0..n`.
fn split_rows(n: usize, seed: u64, tag: &str) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, tag, n as u64));
    let cut = ((n as f64) * TRAIN_FRACTION).round() as usize;
    let (a, b) = idx.split_at(cut);
    (a.to_vec(), b.to_vec())
}

fn rows(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

struct DetectionSplit {
    real_train: Array2<f64>,
    real_test: Array2<f64>,
    synth_train: Array2<f64>,
    synth_test: Array2<f64>,
}

fn detection_split(input: &MeasureInput, measure: &str) -> Result<DetectionSplit> {
    let e = input.embedded(measure)?;
    let (rt, rs) = split_rows(e.train.n(), input.seed, "detection-real");
    let (st, ss) = split_rows(e.synth.n(), input.seed, "detection-synth");
    if [rt.len(), rs.len(), st.len(), ss.len()]
        .iter()
        .any(|&c| c < DETECTION_MIN_PER_SIDE)
    {
        return Err(Error::InvalidInput(format!(
            "{measure}: fewer than {DETECTION_MIN_PER_SIDE} instances per class after the split"
        )));
    }
    let real = e.train.vectors.view();
    let synth = e.synth.vectors.view();
    Ok(DetectionSplit {
        real_train: rows(real, &rt),
        real_test: rows(real, &rs),
        synth_train: rows(synth, &st),
        synth_test: rows(synth, &ss),
    })
}

fn stacked(a: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, Vec<bool>) {
    let x = concatenate(Axis(0), &[a.view(), b.view()]).expect("equal widths");
    let y = std::iter::repeat_n(false, a.nrows())
        .chain(std::iter::repeat_n(true, b.nrows()))
        .collect();
    (x, y)
}

fn auc_output(auc_value: f64) -> MeasureOutput {
    MeasureOutput::real(auc_value).with_detail("abs_deviation", (auc_value - 0.5).abs())
}

/// AUC of a logistic regression separating real (negative) from synthetic (positive) instances.
/// The raw AUC is the score; its distance to 0.5 is kept as a detail.
pub fn detection_linear(input: &MeasureInput) -> Result<MeasureOutput> {
    let s = detection_split(input, "detection_linear")?;
    let (x, y) = stacked(&s.real_train, &s.synth_train);
    let model = Logistic::fit(x.view(), &y)?;
    let pos = model.decision(s.synth_test.view()).to_vec();
    let neg = model.decision(s.real_test.view()).to_vec();
    Ok(auc_output(auc(&pos, &neg)?))
}

/// AUC of the per-class GMM log-likelihood ratio `log p_synth(x) − log p_real(x)`.
pub fn detection_gmm(input: &MeasureInput) -> Result<MeasureOutput> {
    let s = detection_split(input, "detection_gmm")?;
    let components = |n: usize| GMM_COMPONENTS.min(n / DETECTION_MIN_PER_SIDE).max(1);
    let fail = |_| Error::Measure(failures::DETECTION_GMM.to_string());
    let real_model = gmm_fit(s.real_train.view(), components(s.real_train.nrows()), input.seed)
        .map_err(fail)?;
    let synth_model = gmm_fit(s.synth_train.view(), components(s.synth_train.nrows()), input.seed)
        .map_err(fail)?;
    let ratio = |x: &Array2<f64>| -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| synth_model.log_likelihood(r) - real_model.log_likelihood(r))
            .collect()
    };
    let (pos, neg) = (ratio(&s.synth_test), ratio(&s.real_test));
    if pos.iter().chain(&neg).any(|v| !v.is_finite()) {
        return Err(Error::Measure(failures::DETECTION_GMM.to_string()));
    }
    Ok(auc_output(auc(&pos, &neg)?))
}

/// Classifier two-sample test: a logistic classifier is trained on `D_train` versus one half of
/// the synthetic set and evaluated on a balanced set of held-out and other-half synthetic
/// instances. `true` when an exact binomial test rejects chance accuracy at α = 0.05.
pub fn c2st(input: &MeasureInput) -> Result<MeasureOutput> {
    let e = input.embedded("c2st")?;
    let held = input.embedded_held_out("c2st")?;
    let mut synth_idx: Vec<usize> = (0..e.synth.n()).collect();
    synth_idx.shuffle(&mut rng::stream(input.seed, "c2st", 0));
    let half = synth_idx.len() / 2;
    let (fit_idx, eval_idx) = synth_idx.split_at(half);
    let n_eval = eval_idx.len().min(held.n());
    if fit_idx.len() < DETECTION_MIN_PER_SIDE || n_eval < DETECTION_MIN_PER_SIDE {
        return Err(Error::InvalidInput(format!(
            "c2st: fewer than {DETECTION_MIN_PER_SIDE} instances per class"
        )));
    }
    let synth = e.synth.vectors.view();
    let (x, y) = stacked(&e.train.vectors, &rows(synth, fit_idx));
    let model = Logistic::fit(x.view(), &y)?;
    let mut held_idx: Vec<usize> = (0..held.n()).collect();
    held_idx.shuffle(&mut rng::stream(input.seed, "c2st", 1));
    let real_pred = model.predict(rows(held.vectors.view(), &held_idx[..n_eval]).view());
    let synth_pred = model.predict(rows(synth, &eval_idx[..n_eval]).view());
    let correct = real_pred.iter().filter(|p| !**p).count() + synth_pred.iter().filter(|p| **p).count();
    let total = 2 * n_eval;
    let p = binomial_test(correct as u64, total as u64, 0.5)?;
    Ok(MeasureOutput {
        score: Score::Bool(p < ALPHA),
        details: Default::default(),
    }
    .with_detail("accuracy", correct as f64 / total as f64)
    .with_detail("p_value", p))
}
