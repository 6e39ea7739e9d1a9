//! Consistency indicator `r_con`: are the reliability indicators of a measure distributed alike
//! across random seeds (or across datasets)?

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ReliabilityRecord;
use crate::kernels::stats::ks_2sample;
use crate::model::Category;

/// Grouping axis of the consistency indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Dataset,
    Seed,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::Dataset, Axis::Seed];

    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::Dataset => "dataset",
            Axis::Seed => "seed",
        }
    }
}

/// Minimum number of indicators per group.
pub const MIN_GROUP_SIZE: usize = 2;

/// Fraction of group pairs that a two-sample KS test at level `alpha` does not separate.
/// `None` when fewer than two groups have at least [`MIN_GROUP_SIZE`] members.
pub fn consistency_of_groups(groups: &[Vec<f64>], alpha: f64) -> Option<f64> {
    let usable: Vec<&Vec<f64>> = groups.iter().filter(|g| g.len() >= MIN_GROUP_SIZE).collect();
    let n = usable.len();
    if n < 2 {
        return None;
    }
    let mut same = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let p = ks_2sample(usable[i], usable[j]).ok()?.p_value;
            if p >= alpha {
                same += 1;
            }
        }
    }
    Some(2.0 * same as f64 / (n * (n - 1)) as f64)
}

/// `r_con` per (measure, category) along `axis`; cells without enough groups are absent.
pub fn consistency(
    records: &[ReliabilityRecord],
    axis: Axis,
    alpha: f64,
) -> BTreeMap<(String, Category), f64> {
    let mut grouped: BTreeMap<(String, Category), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let key = match axis {
            Axis::Dataset => r.dataset.clone(),
            Axis::Seed => r.seed.to_string(),
        };
        grouped
            .entry((r.measure.clone(), r.category))
            .or_default()
            .entry(key)
            .or_default()
            .push(r.r_rel);
    }
    grouped
        .into_iter()
        .filter_map(|(cell, groups)| {
            let groups: Vec<Vec<f64>> = groups.into_values().collect();
            consistency_of_groups(&groups, alpha).map(|v| (cell, v))
        })
        .collect()
}
