//! Intensity-modulated perturbations of the real data (the pseudo-generator).
//!
//! Every transformation draws its randomness from a stream keyed by the seed, the
//! transformation and its chain position, never by the intensity. Outputs for
//! different intensities therefore share random numbers, which keeps the perturbed
//! sets nested along the modulation path.

mod classes;
mod noise;
pub mod stl;
mod substitution;
pub mod wavelet;

use log::debug;
use ndarray::Axis;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, Role, TransformKind};
use crate::rng;

pub use classes::{label_corruption, mode_collapse, mode_dropping, rare_event_drop};
pub use noise::{gaussian_noise, misalignment, moving_average, salt_and_pepper};
pub use stl::stl_transform;
pub use substitution::{reverse_substitution, segment_leaking, substitution};
pub use wavelet::wavelet_transform;

/// Inputs shared by all transformations for one intensity step.
#[derive(Debug, Clone, Copy)]
pub struct TransformContext<'a> {
    /// Real instances reserved for transformations.
    pub d_rs: Option<&'a Dataset>,
    pub kappa: f64,
    pub seed: u64,
    /// Position of the transformation inside its chain.
    pub position: usize,
}

impl<'a> TransformContext<'a> {
    pub fn new(d_rs: Option<&'a Dataset>, kappa: f64, seed: u64) -> Self {
        Self {
            d_rs,
            kappa,
            seed,
            position: 0,
        }
    }

    pub(crate) fn stream(&self, kind: TransformKind, index: u64) -> ChaCha8Rng {
        rng::stream(
            self.seed,
            kind.config_id(),
            ((self.position as u64) << 48) ^ index,
        )
    }

    pub(crate) fn substitute(&self, kind: TransformKind) -> Result<&'a Dataset> {
        self.d_rs
            .ok_or_else(|| Error::MissingInput(format!("{kind} needs the substitute set D_rs")))
    }
}

/// `⌊x⌋` tolerant of representation error on grid products such as `0.7 · 10`.
pub(crate) fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

pub(crate) fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Per-channel `(min, max)` over all instances and time steps.
pub fn channel_ranges(ds: &Dataset) -> Vec<(f64, f64)> {
    (0..ds.channels())
        .map(|c| {
            ds.values()
                .index_axis(Axis(2), c)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect()
}

pub(crate) fn synthetic_like(ds: &Dataset) -> Dataset {
    ds.clone().with_role(Role::Synthetic)
}

/// Seeded permutation of the instance order; independent of the intensity.
pub fn shuffle(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let mut perm: Vec<usize> = (0..input.n()).collect();
    perm.shuffle(&mut ctx.stream(TransformKind::Shuffle, 0));
    Ok(input.select(&perm, Role::Synthetic))
}

pub fn apply(kind: TransformKind, input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&ctx.kappa) {
        return Err(Error::InvalidInput(format!("kappa {} outside [0, 1]", ctx.kappa)));
    }
    debug!("applying {kind} at kappa {:.3}", ctx.kappa);
    match kind {
        TransformKind::Shuffle => shuffle(input, ctx),
        TransformKind::GaussianNoise => gaussian_noise(input, ctx),
        TransformKind::LabelCorruption => label_corruption(input, ctx),
        TransformKind::Misalignment => misalignment(input, ctx),
        TransformKind::ModeCollapse => mode_collapse(input, ctx),
        TransformKind::ModeDropping => mode_dropping(input, ctx),
        TransformKind::MovingAverage => moving_average(input, ctx),
        TransformKind::RareEventDrop => rare_event_drop(input, ctx),
        TransformKind::ReverseSubstitution => reverse_substitution(input, ctx),
        TransformKind::SaltAndPepper => salt_and_pepper(input, ctx),
        TransformKind::SegmentLeaking => segment_leaking(input, ctx),
        TransformKind::Stl => stl_transform(input, ctx),
        TransformKind::Substitution => substitution(input, ctx),
        TransformKind::Wavelet => wavelet_transform(input, ctx),
    }
}

/// Applies up to two transformations in sequence with the same intensity.
pub fn apply_chain(
    chain: &[TransformKind],
    d_train: &Dataset,
    d_rs: Option<&Dataset>,
    kappa: f64,
    seed: u64,
) -> Result<Dataset> {
    if chain.is_empty() || chain.len() > 2 {
        return Err(Error::InvalidInput(format!(
            "a transformation chain has 1 or 2 members, got {}",
            chain.len()
        )));
    }
    let mut current = d_train.clone();
    for (position, &kind) in chain.iter().enumerate() {
        let ctx = TransformContext {
            d_rs,
            kappa,
            seed,
            position,
        };
        current = apply(kind, &current, &ctx)?;
    }
    current.role = Role::Synthetic;
    Ok(current)
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::data::{generate_sine, split, SineParams};
    use crate::model::{Dataset, SplitNeeds};

    /// Labeled 2-channel Sine train/substitute pair.
    pub fn sine_pair(n: usize, seed: u64) -> (Dataset, Dataset) {
        let ds = generate_sine(&SineParams::default(), n, 40, 2, seed).unwrap();
        let s = split(
            &ds,
            SplitNeeds {
                substitute: true,
                held_out: false,
            },
            seed,
        )
        .unwrap();
        (s.train, s.substitute.unwrap())
    }

    /// Sorted instance fingerprints for multiset comparison.
    pub fn multiset(ds: &Dataset) -> Vec<Vec<u64>> {
        let mut rows: Vec<Vec<u64>> = (0..ds.n())
            .map(|i| ds.instance(i).iter().map(|v| v.to_bits()).collect())
            .collect();
        rows.sort();
        rows
    }

    pub fn contains_instance(ds: &Dataset, row: &ndarray::ArrayView2<f64>) -> bool {
        (0..ds.n()).any(|i| ds.instance(i) == *row)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn shuffle_is_a_permutation_independent_of_kappa() {
        let (train, _) = sine_pair(60, 1);
        let a = apply_chain(&[TransformKind::Shuffle], &train, None, 0.0, 5).unwrap();
        let b = apply_chain(&[TransformKind::Shuffle], &train, None, 0.7, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(multiset(&a), multiset(&train));
        assert_ne!(a.values(), train.values());
    }

    #[test]
    fn chain_shuffle_then_noise_at_zero_is_permutation() {
        let (train, _) = sine_pair(60, 1);
        let out = apply_chain(
            &[TransformKind::Shuffle, TransformKind::GaussianNoise],
            &train,
            None,
            0.0,
            9,
        )
        .unwrap();
        assert_eq!(multiset(&out), multiset(&train));
        let alone = apply_chain(&[TransformKind::GaussianNoise], &train, None, 0.0, 9).unwrap();
        assert_eq!(alone.values(), train.values());
    }

    #[test]
    fn chain_length_is_validated() {
        let (train, _) = sine_pair(20, 1);
        let chain = [TransformKind::Shuffle; 3];
        assert!(apply_chain(&chain, &train, None, 0.5, 1).is_err());
        assert!(apply_chain(&[], &train, None, 0.5, 1).is_err());
    }

    #[test]
    fn every_transform_preserves_shape_and_is_deterministic() {
        let (train, rs) = sine_pair(80, 3);
        for kind in TransformKind::MODULATED {
            let a = apply_chain(&[kind], &train, Some(&rs), 0.6, 11).unwrap();
            let b = apply_chain(&[kind], &train, Some(&rs), 0.6, 11).unwrap();
            assert_eq!(a, b, "{kind}");
            let expected = if kind == TransformKind::ReverseSubstitution
                || kind == TransformKind::SegmentLeaking
            {
                rs.shape()
            } else {
                train.shape()
            };
            assert_eq!(a.shape(), expected, "{kind}");
            assert_eq!(a.role, Role::Synthetic);
        }
    }

    #[test]
    fn kappa_outside_unit_interval_fails() {
        let (train, _) = sine_pair(20, 1);
        assert!(apply_chain(&[TransformKind::GaussianNoise], &train, None, 1.5, 1).is_err());
    }
}
