//! The quality measures under evaluation.
//!
//! A measure sees the training set, the (transformed) synthetic set and, when its descriptor asks
//! for it, the held-out set. Datasets arrive in the form the descriptor declares (raw or unit
//! scaled); embedded measures additionally receive the embeddings of every set.

mod alaa;
mod binning;
mod correlation;
mod cosine;
mod distribution;
mod downstream;
mod detection;
mod fid;
mod manifold;
mod warping;

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, EmbeddedDataset, InputForm, MeasureDescriptor, Score};
use crate::rng;

pub use alaa::{alpha_precision, authenticity, beta_recall, ALAA_GRID, ALAA_MIN_N};
pub use binning::{c_t, ndb, ndb_over_under, ct_cells, ndb_cells};
pub use correlation::{auto_corr, fbca, spatial, temporal, FbcaStats};
pub use cosine::{acs, max_rts, rts, sts, RTS_SYNTHETIC, STS_NEIGHBORS};
pub use detection::{c2st, detection_gmm, detection_linear, DETECTION_MIN_PER_SIDE};
pub use distribution::{distributional_metric, emd_1d, jsd, kld, wd_on_pmf, BINS};
pub use downstream::{cas, predictive, trts, tstr};
pub use fid::{context_fid, FID_SHRINKAGE};
pub use manifold::{
    coverage, coverage_at, density, density_at, improved_precision, improved_recall, precision_at,
    recall_at, MANIFOLD_K,
};
pub use warping::{ap_en, icd, innd, onnd};

/// Sample size of the subsampled measures (icd, innd, onnd, ap_en, spatial, temporal).
pub const SUBSAMPLE_N: usize = 100;

/// Failure messages, one per failure class that a measure can raise in normal operation.
pub mod failures {
    pub const NDB_OVER_UNDER: &str =
        "NDB-over/under: Too many cells in partition/No samples in a cell";
    pub const CONTEXT_FID: &str =
        "Context-FID: Imaginary component in fr\u{e9}chet distance calculation";
    pub const DETECTION_GMM: &str = "Detection_GMM: Fitting the mixture model failed";
    pub const SPATIAL: &str =
        "Spatial correlation: Cannot compute Pearson correlation for any of the given samples";

    pub fn c_t_cell(cell: usize) -> String {
        format!("C_T: Cell {cell} is missing test or training samples.")
    }
}

/// Embeddings of the sets in a [`MeasureInput`].
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedSets<'a> {
    pub train: &'a EmbeddedDataset,
    pub synth: &'a EmbeddedDataset,
    pub held_out: Option<&'a EmbeddedDataset>,
}

/// Everything a measure may consume for one intensity step.
#[derive(Debug, Clone, Copy)]
pub struct MeasureInput<'a> {
    pub train: &'a Dataset,
    pub synth: &'a Dataset,
    pub held_out: Option<&'a Dataset>,
    pub embedded: Option<EmbeddedSets<'a>>,
    pub seed: u64,
}

impl<'a> MeasureInput<'a> {
    pub fn new(train: &'a Dataset, synth: &'a Dataset, seed: u64) -> Self {
        Self {
            train,
            synth,
            held_out: None,
            embedded: None,
            seed,
        }
    }

    pub fn with_held_out(mut self, held_out: &'a Dataset) -> Self {
        self.held_out = Some(held_out);
        self
    }

    pub fn with_embedded(mut self, embedded: EmbeddedSets<'a>) -> Self {
        self.embedded = Some(embedded);
        self
    }

    pub(crate) fn held_out(&self, measure: &str) -> Result<&'a Dataset> {
        self.held_out
            .ok_or_else(|| Error::MissingInput(format!("{measure} needs a held-out set")))
    }

    pub(crate) fn embedded(&self, measure: &str) -> Result<EmbeddedSets<'a>> {
        self.embedded
            .ok_or_else(|| Error::MissingInput(format!("{measure} needs embedded inputs")))
    }

    pub(crate) fn embedded_held_out(&self, measure: &str) -> Result<&'a EmbeddedDataset> {
        self.embedded(measure)?
            .held_out
            .ok_or_else(|| Error::MissingInput(format!("{measure} needs an embedded held-out set")))
    }
}

/// A score plus auxiliary values kept for diagnostics (raw AUC, the five FBCA statistics, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureOutput {
    pub score: Score,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl MeasureOutput {
    pub fn real(v: f64) -> Self {
        Self {
            score: Score::Real(v),
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, v: f64) -> Self {
        self.details.insert(key.to_string(), v);
        self
    }
}

/// Instance indices of the size-`SUBSAMPLE_N` subsample; a function of `(n, seed)` only, so two
/// sets of equal size are subsampled at the same positions.
pub fn subsample_indices(n: usize, seed: u64) -> Vec<usize> {
    if n <= SUBSAMPLE_N {
        return (0..n).collect();
    }
    let mut idx = index::sample(&mut rng::stream(seed, "subsample", n as u64), n, SUBSAMPLE_N)
        .into_vec();
    idx.sort_unstable();
    idx
}

pub fn subsample(ds: &Dataset, seed: u64) -> Dataset {
    if ds.n() <= SUBSAMPLE_N {
        return ds.clone();
    }
    ds.select(&subsample_indices(ds.n(), seed), ds.role)
}

/// Checks that `input` carries everything `descriptor` declares.
pub fn check_input(descriptor: &MeasureDescriptor, input: &MeasureInput) -> Result<()> {
    let id = descriptor.id.as_str();
    if descriptor.needs_held_out {
        input.held_out(id)?;
        if descriptor.input == InputForm::Embedded {
            input.embedded_held_out(id)?;
        }
    }
    if descriptor.input == InputForm::Embedded {
        input.embedded(id)?;
    }
    if descriptor.needs_labels && !(input.train.has_labels() && input.synth.has_labels()) {
        return Err(Error::Inapplicable(format!("{id} requires labeled data")));
    }
    if descriptor.needs_multivariate && input.train.channels() < 2 {
        return Err(Error::Inapplicable(format!("{id} requires d>1")));
    }
    if input.train.channels() != input.synth.channels()
        || input.train.length() != input.synth.length()
    {
        return Err(Error::InvalidInput(format!(
            "{id}: real and synthetic series differ in shape"
        )));
    }
    Ok(())
}

/// Runs the measure named by `descriptor` on `input`.
pub fn compute(descriptor: &MeasureDescriptor, input: &MeasureInput) -> Result<MeasureOutput> {
    check_input(descriptor, input)?;
    let real = |v: Result<f64>| v.map(MeasureOutput::real);
    let out = match descriptor.id.as_str() {
        "acs" => real(acs(input)),
        "alpha_precision" => real(alpha_precision(input)),
        "ap_en" => real(ap_en(input)),
        "authenticity" => real(authenticity(input)),
        "auto_corr" => real(auto_corr(input)),
        "beta_recall" => real(beta_recall(input)),
        "c2st" => c2st(input),
        "c_t" => real(c_t(input)),
        "cas" => real(cas(input)),
        "context_fid" => real(context_fid(input)),
        "Coverage" => real(coverage(input)),
        "Density" => real(density(input)),
        "detection_gmm" => detection_gmm(input),
        "detection_linear" => detection_linear(input),
        "distributional_metric" => real(distributional_metric(input)),
        "fbca" => fbca(input).map(FbcaStats::into_output),
        "icd" => real(icd(input)),
        "improved_precision" => real(improved_precision(input)),
        "improved_recall" => real(improved_recall(input)),
        "innd" => real(innd(input)),
        "jsd" => real(jsd(input)),
        "kld" => real(kld(input)),
        "max_rts" => real(max_rts(input)),
        "ndb" => real(ndb(input)),
        "ndbou" => ndb_over_under(input).map(|(under, over)| MeasureOutput {
            score: Score::Pair(under, over),
            details: BTreeMap::new(),
        }),
        "onnd" => real(onnd(input)),
        "predictive" => real(predictive(input)),
        "rts" => real(rts(input)),
        "spatial" => real(spatial(input)),
        "sts" => real(sts(input)),
        "temporal" => real(temporal(input)),
        "trts" => real(trts(input)),
        "tstr" => real(tstr(input)),
        "wd_on_pmf" => real(wd_on_pmf(input)),
        other => Err(Error::UnknownId(format!("measure {other}"))),
    }?;
    if !out.score.is_finite() {
        return Err(Error::Numerical(format!(
            "{} produced a non-finite score",
            descriptor.id
        )));
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::data::{generate_sine, SineParams};
    use crate::embed::FittedEmbedder;
    use crate::model::{Dataset, EmbeddedDataset, EmbedderKind};
    use ndarray::Array2;

    pub fn sine(n: usize, seed: u64) -> Dataset {
        generate_sine(&SineParams::default(), n, 32, 2, seed).unwrap()
    }

    pub fn embed(train: &Dataset, sets: &[&Dataset]) -> Vec<EmbeddedDataset> {
        let fitted = FittedEmbedder::fit(EmbedderKind::StatFeat, train).unwrap();
        sets.iter().map(|s| fitted.embed(s).unwrap()).collect()
    }

    pub fn embedded(vectors: Array2<f64>) -> EmbeddedDataset {
        EmbeddedDataset {
            vectors,
            source: "toy".into(),
            embedder: "concat".into(),
        }
    }

    /// Two-instance placeholder dataset for measures that only read embeddings.
    pub fn placeholder() -> Dataset {
        Dataset::new(
            ndarray::Array3::zeros((2, 8, 1)),
            None,
            "placeholder",
            crate::model::Role::Train,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::model::MeasureRegistry;

    #[test]
    fn subsample_is_positional() {
        assert_eq!(subsample_indices(50, 1), (0..50).collect::<Vec<_>>());
        let a = subsample_indices(500, 7);
        assert_eq!(a.len(), SUBSAMPLE_N);
        assert_eq!(a, subsample_indices(500, 7));
        assert_ne!(a, subsample_indices(500, 8));
    }

    #[test]
    fn missing_inputs_are_reported() {
        let reg = MeasureRegistry::builtin();
        let d = sine(60, 1);
        let input = MeasureInput::new(&d, &d, 1);
        assert!(matches!(
            compute(reg.get("tstr").unwrap(), &input),
            Err(Error::MissingInput(_))
        ));
        assert!(matches!(
            compute(reg.get("jsd").unwrap(), &input),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn every_builtin_measure_runs_on_sine() {
        let reg = MeasureRegistry::builtin();
        let train = sine(240, 3);
        let synth = sine(240, 4);
        let held = sine(240, 5);
        let e = embed(&train, &[&train, &synth, &held]);
        let input = MeasureInput::new(&train, &synth, 11)
            .with_held_out(&held)
            .with_embedded(EmbeddedSets {
                train: &e[0],
                synth: &e[1],
                held_out: Some(&e[2]),
            });
        for desc in reg.iter() {
            let out = compute(desc, &input).unwrap_or_else(|e| panic!("{}: {e}", desc.id));
            assert!(out.score.is_finite(), "{}", desc.id);
            let again = compute(desc, &input).unwrap();
            assert_eq!(out, again, "{} is not deterministic", desc.id);
        }
    }
}
