//! Transformations that mix real training instances with the substitute set D_rs.

use ndarray::s;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{floor_count, round_count, synthetic_like, TransformContext};
use crate::error::{Error, Result};
use crate::model::{Dataset, TransformKind};

/// Maximum number of training instances leaked by reverse substitution.
pub const MAX_LEAKED_INSTANCES: usize = 10;
/// Maximum number of leaked segments.
pub const MAX_LEAKED_SEGMENTS: usize = 30;

fn copy_instance(out: &mut Dataset, target: usize, source: &Dataset, from: usize) {
    out.values_mut()
        .slice_mut(s![target, .., ..])
        .assign(&source.instance(from));
    if let (Some(src), Some(dst)) = (source.labels().map(|l| l[from]), out.labels_mut()) {
        dst[target] = src;
    }
}

/// Replaces ⌊κ · n⌋ instances by distinct random instances of D_rs.
pub fn substitution(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::Substitution;
    let rs = ctx.substitute(kind)?;
    let count = floor_count(ctx.kappa * input.n() as f64);
    if count > rs.n() {
        return Err(Error::InvalidInput(format!(
            "substitution needs {count} instances but D_rs has {}",
            rs.n()
        )));
    }
    let mut rng = ctx.stream(kind, 0);
    let mut targets: Vec<usize> = (0..input.n()).collect();
    targets.shuffle(&mut rng);
    let mut sources: Vec<usize> = (0..rs.n()).collect();
    sources.shuffle(&mut rng);
    let mut out = synthetic_like(input);
    for (&t, &src) in targets.iter().zip(&sources).take(count) {
        copy_instance(&mut out, t, rs, src);
    }
    Ok(out)
}

/// Starts from D_rs and overwrites round(10κ) of its instances with verbatim training instances.
pub fn reverse_substitution(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::ReverseSubstitution;
    let rs = ctx.substitute(kind)?;
    if rs.n() < MAX_LEAKED_INSTANCES || input.n() < MAX_LEAKED_INSTANCES {
        return Err(Error::Inapplicable(format!(
            "reverse substitution needs at least {MAX_LEAKED_INSTANCES} instances on both sides"
        )));
    }
    if rs.length() != input.length() || rs.channels() != input.channels() {
        return Err(Error::InvalidInput("D_rs and D_train differ in shape".into()));
    }
    let count = round_count(MAX_LEAKED_INSTANCES as f64 * ctx.kappa);
    let mut rng = ctx.stream(kind, 0);
    let targets = index::sample(&mut rng, rs.n(), MAX_LEAKED_INSTANCES);
    let sources = index::sample(&mut rng, input.n(), MAX_LEAKED_INSTANCES);
    let mut out = synthetic_like(rs);
    for (t, src) in targets.iter().zip(sources.iter()).take(count) {
        copy_instance(&mut out, t, input, src);
    }
    Ok(out)
}

/// A pre-drawn segment: target slot in D_rs, source training instance, start and length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub instance: usize,
    pub channel: usize,
    pub source: usize,
    pub start: usize,
    pub len: usize,
}

pub fn segment_length_bounds(l: usize) -> (usize, usize) {
    (l.div_ceil(4), l / 2)
}

/// The 30 candidate segments; the first round(30κ) are applied.
pub fn leak_plan(rs: &Dataset, train_n: usize, ctx: &TransformContext) -> Vec<Segment> {
    let (n, l, d) = rs.shape();
    let (lo, hi) = segment_length_bounds(l);
    let mut rng = ctx.stream(TransformKind::SegmentLeaking, 0);
    let slots = n * d;
    let picks: Vec<usize> = if slots >= MAX_LEAKED_SEGMENTS {
        index::sample(&mut rng, slots, MAX_LEAKED_SEGMENTS).into_vec()
    } else {
        (0..MAX_LEAKED_SEGMENTS).map(|k| k % slots).collect()
    };
    picks
        .into_iter()
        .map(|slot| {
            let len = rng.random_range(lo..=hi);
            Segment {
                instance: slot / d,
                channel: slot % d,
                source: rng.random_range(0..train_n),
                start: rng.random_range(0..=l - len),
                len,
            }
        })
        .collect()
}

/// Starts from D_rs and overwrites round(30κ) single-channel segments with training data.
pub fn segment_leaking(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::SegmentLeaking;
    let rs = ctx.substitute(kind)?;
    if rs.length() < 8 {
        return Err(Error::Inapplicable("segment_leaking requires l >= 8".into()));
    }
    if rs.length() != input.length() || rs.channels() != input.channels() {
        return Err(Error::InvalidInput("D_rs and D_train differ in shape".into()));
    }
    let count = round_count(MAX_LEAKED_SEGMENTS as f64 * ctx.kappa);
    let mut out = synthetic_like(rs);
    for seg in leak_plan(rs, input.n(), ctx).into_iter().take(count) {
        let piece = input
            .values()
            .slice(s![seg.source, seg.start..seg.start + seg.len, seg.channel])
            .to_owned();
        out.values_mut()
            .slice_mut(s![seg.instance, seg.start..seg.start + seg.len, seg.channel])
            .assign(&piece);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    fn ctx(kappa: f64, rs: &Dataset) -> TransformContext<'_> {
        TransformContext::new(Some(rs), kappa, 13)
    }

    #[test]
    fn substitution_counts() {
        let (train, rs) = sine_pair(200, 1);
        assert_eq!(substitution(&train, &ctx(0.0, &rs)).unwrap().values(), train.values());
        let half = substitution(&train, &ctx(0.5, &rs)).unwrap();
        let from_rs = (0..half.n())
            .filter(|&i| contains_instance(&rs, &half.instance(i)))
            .count();
        assert_eq!(from_rs, 50);
        let full = substitution(&train, &ctx(1.0, &rs)).unwrap();
        assert!((0..full.n()).all(|i| !contains_instance(&train, &full.instance(i))));
        assert!(substitution(&train, &TransformContext::new(None, 0.5, 1)).is_err());
    }

    #[test]
    fn reverse_substitution_leaks_ten() {
        let (train, rs) = sine_pair(200, 2);
        let zero = reverse_substitution(&train, &ctx(0.0, &rs)).unwrap();
        assert_eq!(zero.values(), rs.values());
        for (kappa, expected) in [(1.0, 10), (0.5, 5)] {
            let out = reverse_substitution(&train, &ctx(kappa, &rs)).unwrap();
            let leaked = (0..out.n())
                .filter(|&i| contains_instance(&train, &out.instance(i)))
                .count();
            assert_eq!(leaked, expected);
        }
    }

    #[test]
    fn segment_leaking_runs() {
        let (train, rs) = sine_pair(200, 3);
        assert_eq!(segment_leaking(&train, &ctx(0.0, &rs)).unwrap().values(), rs.values());
        let out = segment_leaking(&train, &ctx(1.0, &rs)).unwrap();
        let (lo, hi) = segment_length_bounds(rs.length());
        let mut segments = 0;
        for i in 0..rs.n() {
            for c in 0..rs.channels() {
                let a = out.channel(i, c);
                let b = rs.channel(i, c);
                let mut t = 0;
                while t < a.len() {
                    if a[t] != b[t] {
                        let start = t;
                        while t < a.len() && a[t] != b[t] {
                            t += 1;
                        }
                        // A leaked run may agree with D_rs at isolated points only by coincidence.
                        assert!(t - start <= hi);
                        segments += 1;
                    } else {
                        t += 1;
                    }
                }
            }
        }
        assert_eq!(segments, 30);
        for seg in leak_plan(&rs, train.n(), &ctx(1.0, &rs)) {
            assert!((lo..=hi).contains(&seg.len));
        }
    }
}
