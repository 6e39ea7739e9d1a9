//! Aggregated tables: reliability per (measure, category), rankings, runtimes, success
//! statistics and failure reasons.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ReliabilityRecord, TestOutcome};
use crate::kernels::stats::{mean, std};
use crate::model::{Category, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: mean(values),
            std: if values.len() > 1 { std(values) } else { 0.0 },
            n: values.len(),
        })
    }
}

/// Mean ± std of `r_rel` per measure and category. Every measure that appears in the
/// outcomes has a row; cells without indicators are `None` (rendered N/A).
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTable {
    pub rows: BTreeMap<String, BTreeMap<Category, Option<MeanStd>>>,
}

impl ReliabilityTable {
    pub fn build<'a>(
        measures: impl IntoIterator<Item = &'a str>,
        records: &[ReliabilityRecord],
    ) -> Self {
        let mut values: BTreeMap<(String, Category), Vec<f64>> = BTreeMap::new();
        for r in records {
            values
                .entry((r.measure.clone(), r.category))
                .or_default()
                .push(r.r_rel);
        }
        let mut rows: BTreeMap<String, BTreeMap<Category, Option<MeanStd>>> = BTreeMap::new();
        for m in measures {
            rows.entry(m.to_string()).or_default();
        }
        for r in records {
            rows.entry(r.measure.clone()).or_default();
        }
        for (m, cells) in rows.iter_mut() {
            for c in Category::ALL {
                let v = values.get(&(m.clone(), c)).map(Vec::as_slice).unwrap_or(&[]);
                cells.insert(c, MeanStd::of(v));
            }
        }
        Self { rows }
    }

    pub fn get(&self, measure: &str, category: Category) -> Option<MeanStd> {
        self.rows.get(measure).and_then(|r| r.get(&category).copied().flatten())
    }

    /// Measures of one category by decreasing mean; N/A cells last, alphabetically.
    pub fn ranking(&self, category: Category) -> Vec<(String, Option<MeanStd>)> {
        let mut out: Vec<(String, Option<MeanStd>)> = self
            .rows
            .iter()
            .map(|(m, cells)| (m.clone(), cells.get(&category).copied().flatten()))
            .collect();
        out.sort_by(|(ma, a), (mb, b)| match (a, b) {
            (Some(x), Some(y)) => y.mean.total_cmp(&x.mean).then(ma.cmp(mb)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => ma.cmp(mb),
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    /// Over un-aided executions; `None` when there are none.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub valid: usize,
    pub cached: usize,
}

impl RuntimeStats {
    /// Statistics of `(seconds, cached)` samples; cached samples are only counted.
    pub fn of(samples: &[(f64, bool)]) -> Self {
        let fresh: Vec<f64> = samples.iter().filter(|s| !s.1).map(|s| s.0).collect();
        let cached = samples.len() - fresh.len();
        let summary = MeanStd::of(&fresh);
        Self {
            mean: summary.map(|s| s.mean),
            std: summary.map(|s| s.std),
            valid: fresh.len(),
            cached,
        }
    }
}

/// Runtime statistics keyed by (measure or embedder, dataset).
pub type RuntimeTable = BTreeMap<(String, String), RuntimeStats>;

/// Per-step measure runtimes of successful tests.
pub fn measure_runtimes(outcomes: &[TestOutcome]) -> RuntimeTable {
    let mut samples: BTreeMap<(String, String), Vec<(f64, bool)>> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.status == Status::Successful) {
        let entry = samples
            .entry((o.spec.measure.clone(), o.spec.dataset.clone()))
            .or_default();
        for (i, &t) in o.runtimes.iter().enumerate() {
            entry.push((t, o.runtime_cached.get(i).copied().unwrap_or(false)));
        }
    }
    samples.into_iter().map(|(k, v)| (k, RuntimeStats::of(&v))).collect()
}

/// Per-step embedding runtimes of successful embedder-dependent tests.
pub fn embedder_runtimes(outcomes: &[TestOutcome]) -> RuntimeTable {
    let mut samples: BTreeMap<(String, String), Vec<(f64, bool)>> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.status == Status::Successful) {
        let Some(embedder) = o.spec.embedder else {
            continue;
        };
        let entry = samples
            .entry((embedder.id().to_string(), o.spec.dataset.clone()))
            .or_default();
        for (i, &t) in o.embed_runtimes.iter().enumerate() {
            entry.push((t, o.embed_cached.get(i).copied().unwrap_or(false)));
        }
    }
    samples.into_iter().map(|(k, v)| (k, RuntimeStats::of(&v))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuccessStats {
    /// Attempted tests (successful or failed; skipped tests are not attempted).
    pub total: usize,
    pub successful: usize,
}

impl SuccessStats {
    /// Success rate in percent.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.successful as f64 / self.total as f64)
    }
}

pub fn success_statistics(outcomes: &[TestOutcome]) -> BTreeMap<String, SuccessStats> {
    let mut out: BTreeMap<String, SuccessStats> = BTreeMap::new();
    for o in outcomes {
        let entry = out.entry(o.spec.measure.clone()).or_default();
        match o.status {
            Status::Successful => {
                entry.total += 1;
                entry.successful += 1;
            }
            Status::Failed => entry.total += 1,
            _ => {}
        }
    }
    out
}

/// Failure class of a recorded reason. Measure-specific messages are kept (with C_T cell
/// numbers generalized); anything unrecognized is a generic runtime error.
pub fn failure_category(reason: &str) -> String {
    use crate::measures::failures;
    let known = [
        failures::NDB_OVER_UNDER,
        failures::CONTEXT_FID,
        failures::DETECTION_GMM,
        failures::SPATIAL,
    ];
    if let Some(k) = known.iter().find(|k| reason.starts_with(**k)) {
        return k.to_string();
    }
    if reason.starts_with("C_T: Cell ") {
        return "C_T: Cell x is missing test or training samples.".to_string();
    }
    if reason.starts_with("Time limit of ") || reason.starts_with("Memory limit of ") {
        return reason.to_string();
    }
    "Non-CUDA Runtime error".to_string()
}

pub fn failure_counts(outcomes: &[TestOutcome]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.status == Status::Failed) {
        let reason = o.failure_reason.as_deref().unwrap_or("");
        *out.entry(failure_category(reason)).or_insert(0) += 1;
    }
    out
}
