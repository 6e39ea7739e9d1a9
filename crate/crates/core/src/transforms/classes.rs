//! Label-aware transformations: label swaps, mode collapse, mode dropping and rare-event removal.

use std::collections::BTreeMap;

use log::warn;
use ndarray::{s, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{channel_ranges, floor_count, synthetic_like, TransformContext};
use crate::error::{Error, Result};
use crate::model::{Dataset, TransformKind};

/// Standard deviation of duplicate noise in `[0, 1]`-scaled space.
pub const COLLAPSE_SIGMA: f64 = 0.025;

fn labels_of(input: &Dataset, kind: TransformKind) -> Result<Vec<u32>> {
    input
        .labels()
        .map(<[u32]>::to_vec)
        .ok_or_else(|| Error::Inapplicable(format!("{kind} requires labeled data")))
}

fn members_by_class(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        map.entry(y).or_default().push(i);
    }
    map
}

/// Swaps labels between ⌊κ/10 · n⌋ instances (rounded down to even), paired across classes.
pub fn label_corruption(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::LabelCorruption;
    let mut labels = labels_of(input, kind)?;
    let n = input.n();
    let mut participants = floor_count(ctx.kappa / 10.0 * n as f64);
    participants -= participants % 2;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ctx.stream(kind, 0));

    let original = labels.clone();
    let mut used = vec![false; n];
    let mut pairs = 0;
    for a_pos in 0..n {
        if pairs * 2 >= participants {
            break;
        }
        let a = order[a_pos];
        if used[a] {
            continue;
        }
        let partner = order[a_pos + 1..]
            .iter()
            .copied()
            .find(|&b| !used[b] && original[b] != original[a]);
        let Some(b) = partner else {
            continue;
        };
        used[a] = true;
        used[b] = true;
        labels.swap(a, b);
        pairs += 1;
    }
    if pairs * 2 < participants {
        warn!(
            "label corruption: only {} of {participants} instances have a partner from another class",
            pairs * 2
        );
    }
    let mut out = synthetic_like(input);
    if let Some(slot) = out.labels_mut() {
        *slot = labels;
    }
    Ok(out)
}

/// Per class, replaces ⌊κ · size⌋ instances (at most size − 1) by noisy duplicates of survivors.
pub fn mode_collapse(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::ModeCollapse;
    let labels = labels_of(input, kind)?;
    let ranges = channel_ranges(input);
    let (_, l, d) = input.shape();
    let mut out = synthetic_like(input);
    for (class, mut members) in members_by_class(&labels) {
        let size = members.len();
        let mut removed = floor_count(ctx.kappa * size as f64);
        if removed >= size {
            if size == 1 && ctx.kappa > 0.0 {
                warn!("mode collapse: class {class} has a single instance and is kept as is");
            }
            removed = size - 1;
        }
        members.shuffle(&mut ctx.stream(kind, u64::from(class)));
        let (dropped, survivors) = members.split_at(removed);
        for (slot, &target) in dropped.iter().enumerate() {
            let mut rng = ctx.stream(kind, (u64::from(class) << 32) | (slot as u64 + 1));
            let source = survivors[rng.random_range(0..survivors.len())];
            for t in 0..l {
                for c in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    let (lo, hi) = ranges[c];
                    out.values_mut()[[target, t, c]] =
                        input.values()[[source, t, c]] + (hi - lo) * COLLAPSE_SIGMA * z;
                }
            }
        }
    }
    Ok(out)
}

/// Drops the ⌊κ · C⌋ lowest-id classes (at most C − 1) and refills their slots from the rest.
pub fn mode_dropping(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::ModeDropping;
    let labels = labels_of(input, kind)?;
    let classes = members_by_class(&labels);
    let count = classes.len();
    if count < 2 {
        return Err(Error::Inapplicable("mode dropping needs at least 2 classes".into()));
    }
    let mut dropped = floor_count(ctx.kappa * count as f64);
    if dropped >= count {
        warn!("mode dropping: capping {dropped} dropped classes at {}", count - 1);
        dropped = count - 1;
    }
    let dropped_ids: Vec<u32> = classes.keys().copied().take(dropped).collect();
    let pool: Vec<usize> = (0..input.n())
        .filter(|i| !dropped_ids.contains(&labels[*i]))
        .collect();
    let mut out = synthetic_like(input);
    let mut rng = ctx.stream(kind, 0);
    let mut new_labels = labels.clone();
    for i in 0..input.n() {
        // One draw per instance keeps the stream independent of κ.
        let u: f64 = rng.random();
        if !dropped_ids.contains(&labels[i]) {
            continue;
        }
        let source = pool[((u * pool.len() as f64) as usize).min(pool.len() - 1)];
        let row = input.values().index_axis(Axis(0), source).to_owned();
        out.values_mut().slice_mut(s![i, .., ..]).assign(&row);
        new_labels[i] = labels[source];
    }
    if let Some(slot) = out.labels_mut() {
        *slot = new_labels;
    }
    Ok(out)
}

/// Replaces ⌊κ · size⌋ instances of the smallest class with other-class instances from D_rs.
pub fn rare_event_drop(input: &Dataset, ctx: &TransformContext) -> Result<Dataset> {
    let kind = TransformKind::RareEventDrop;
    let labels = labels_of(input, kind)?;
    let rs = ctx.substitute(kind)?;
    let rs_labels = rs
        .labels()
        .ok_or_else(|| Error::MissingInput("D_rs has no labels".into()))?;
    let classes = members_by_class(&labels);
    let (&rare, members) = classes
        .iter()
        .min_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.0.cmp(b.0)))
        .ok_or_else(|| Error::InvalidInput("empty dataset".into()))?;
    let mut candidates: Vec<usize> = (0..rs.n()).filter(|&j| rs_labels[j] != rare).collect();
    if candidates.is_empty() {
        return Err(Error::MissingInput(
            "D_rs has no instances outside the smallest class".into(),
        ));
    }
    let mut members = members.clone();
    let mut rng = ctx.stream(kind, 0);
    members.shuffle(&mut rng);
    candidates.shuffle(&mut rng);
    let count = floor_count(ctx.kappa * members.len() as f64);
    let mut out = synthetic_like(input);
    let mut new_labels = labels.clone();
    for (k, &target) in members.iter().take(count).enumerate() {
        let source = candidates[k % candidates.len()];
        out.values_mut()
            .slice_mut(s![target, .., ..])
            .assign(&rs.instance(source));
        new_labels[target] = rs_labels[source];
    }
    if let Some(slot) = out.labels_mut() {
        *slot = new_labels;
    }
    Ok(out)
}
