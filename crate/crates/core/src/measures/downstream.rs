//! Downstream-task measures: one-step forecasting (predictive score, TRTS, TSTR) and
//! classification accuracy (CAS).

use super::MeasureInput;
use crate::embed::FittedEmbedder;
use crate::error::{Error, Result};
use crate::kernels::linear::{OneVsRest, RidgeForecaster};
use crate::model::{Dataset, EmbedderKind};

fn forecaster(train: &Dataset) -> Result<RidgeForecaster> {
    RidgeForecaster::fit(train, RidgeForecaster::default_window(train.length()))
}

/// MAE on the real data of a forecaster trained on the synthetic data.
pub fn predictive(input: &MeasureInput) -> Result<f64> {
    forecaster(input.synth)?.mae(input.train)
}

/// `|MAE(real-trained on real) − MAE(real-trained on synthetic)|`.
pub fn trts(input: &MeasureInput) -> Result<f64> {
    let f = forecaster(input.train)?;
    Ok((f.mae(input.train)? - f.mae(input.synth)?).abs())
}

/// `|MAE(synthetic-trained on held-out) − MAE(real-trained on held-out)|`.
pub fn tstr(input: &MeasureInput) -> Result<f64> {
    let held = input.held_out("tstr")?;
    let synth_model = forecaster(input.synth)?;
    let real_model = forecaster(input.train)?;
    Ok((synth_model.mae(held)? - real_model.mae(held)?).abs())
}

/// `|acc(real-trained) − acc(synthetic-trained)|` on the held-out set, for a one-vs-rest
/// logistic classifier on statistical features.
pub fn cas(input: &MeasureInput) -> Result<f64> {
    let held = input.held_out("cas")?;
    let labels = |ds: &Dataset| {
        ds.labels()
            .map(<[u32]>::to_vec)
            .ok_or_else(|| Error::Inapplicable("cas requires labeled data".into()))
    };
    let features = FittedEmbedder::fit(EmbedderKind::StatFeat, input.train)?;
    let train_x = features.embed(input.train)?.vectors;
    let synth_x = features.embed(input.synth)?.vectors;
    let held_x = features.embed(held)?.vectors;
    let held_y = labels(held)?;
    let real_model = OneVsRest::fit(train_x.view(), &labels(input.train)?)?;
    let synth_model = OneVsRest::fit(synth_x.view(), &labels(input.synth)?)?;
    Ok((real_model.accuracy(held_x.view(), &held_y) - synth_model.accuracy(held_x.view(), &held_y)).abs())
}
