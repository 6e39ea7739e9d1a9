//! Statistical comparison of reliability indicators between measures within one category:
//! Kruskal–Wallis omnibus test, pairwise Mann–Whitney U tests with Bonferroni correction, and
//! the data behind a critical difference diagram.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::stats::{kruskal_wallis, mann_whitney_u, mean, TestResult};
use crate::model::Category;

/// Minimum number of measures and of indicators per measure.
pub const MIN_MEASURES: usize = 3;
pub const MIN_RECORDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureMean {
    pub measure: String,
    pub mean_r_rel: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub p_value: f64,
    /// Bonferroni-adjusted, capped at 1.
    pub p_adjusted: f64,
    pub different: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omnibus {
    pub statistic: f64,
    pub p_value: f64,
}

/// Everything a critical difference diagram needs for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub category: Category,
    pub alpha: f64,
    pub kruskal_wallis: Omnibus,
    /// Number of measure pairs; the Bonferroni factor.
    pub pair_count: usize,
    /// Measures ordered by decreasing mean reliability.
    pub measures: Vec<MeasureMean>,
    pub pairwise: Vec<PairTest>,
    /// Pairs not found significantly different (the diagram's connecting bars).
    pub indistinguishable: Vec<(String, String)>,
}

impl Comparison {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Compares the reliability indicators of the measures in `groups` (measure → indicators).
/// Measures with fewer than [`MIN_RECORDS`] indicators are left out.
pub fn statistical_comparison(
    category: Category,
    groups: &BTreeMap<String, Vec<f64>>,
    alpha: f64,
) -> Result<Comparison> {
    let kept: Vec<(&String, &Vec<f64>)> = groups
        .iter()
        .filter(|(_, v)| v.len() >= MIN_RECORDS)
        .collect();
    if kept.len() < MIN_MEASURES {
        return Err(invalid(format!(
            "comparison in {category} needs {MIN_MEASURES} measures with {MIN_RECORDS} indicators each"
        )));
    }
    let mut measures: Vec<MeasureMean> = kept
        .iter()
        .map(|(m, v)| MeasureMean {
            measure: (*m).clone(),
            mean_r_rel: mean(v),
            n: v.len(),
        })
        .collect();
    measures.sort_by(|a, b| b.mean_r_rel.total_cmp(&a.mean_r_rel).then(a.measure.cmp(&b.measure)));

    let values: Vec<Vec<f64>> = kept.iter().map(|(_, v)| (*v).clone()).collect();
    let pair_count = kept.len() * (kept.len() - 1) / 2;
    let first = values[0][0];
    let degenerate = values.iter().flatten().all(|&v| v == first);
    let omnibus = if degenerate {
        TestResult {
            statistic: 0.0,
            p_value: 1.0,
        }
    } else {
        kruskal_wallis(&values)?
    };

    let mut pairwise = Vec::with_capacity(pair_count);
    let mut indistinguishable = Vec::new();
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            let (a, b) = (kept[i].0.clone(), kept[j].0.clone());
            if degenerate {
                indistinguishable.push((a, b));
                continue;
            }
            let p = mann_whitney_u(kept[i].1, kept[j].1)?.p_value;
            let p_adjusted = (p * pair_count as f64).min(1.0);
            let different = p_adjusted < alpha;
            if !different {
                indistinguishable.push((a.clone(), b.clone()));
            }
            pairwise.push(PairTest {
                a,
                b,
                p_value: p,
                p_adjusted,
                different,
            });
        }
    }
    Ok(Comparison {
        category,
        alpha,
        kruskal_wallis: Omnibus {
            statistic: omnibus.statistic,
            p_value: omnibus.p_value,
        },
        pair_count,
        measures,
        pairwise,
        indistinguishable,
    })
}
