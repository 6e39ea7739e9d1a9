//! Report assembly and rendering: CSV tables, critical-difference JSON and the measure
//! selection guide.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::comparison::statistical_comparison;
use super::consistency::{consistency, Axis};
use super::tables::{
    embedder_runtimes, failure_counts, measure_runtimes, success_statistics, MeanStd,
    ReliabilityTable, RuntimeTable, SuccessStats,
};
use super::{reliability_records, Comparison, ReliabilityRecord, TestOutcome};
use crate::error::Result;
use crate::measures::failures;
use crate::model::{Category, ExpectedBehaviorTable, MeasureRegistry};

/// Minimum consistency a measure needs to be suggested.
pub const SELECTION_MIN_CONSISTENCY: f64 = 0.5;

const NA: &str = "N/A";

/// All evaluation results of one experiment.
#[derive(Debug, Clone)]
pub struct Report {
    pub records: Vec<ReliabilityRecord>,
    pub reliability: ReliabilityTable,
    pub consistency: BTreeMap<Axis, BTreeMap<(String, Category), f64>>,
    pub comparisons: BTreeMap<Category, std::result::Result<Comparison, String>>,
    pub measure_runtimes: RuntimeTable,
    pub embedder_runtimes: RuntimeTable,
    pub statistics: BTreeMap<String, SuccessStats>,
    pub failures: BTreeMap<String, usize>,
    /// Measures that need an embedding.
    pub embedded_measures: BTreeSet<String>,
}

#[derive(Serialize)]
struct Unavailable<'a> {
    category: Category,
    unavailable: &'a str,
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

fn fmt_cell(cell: Option<MeanStd>) -> String {
    cell.map_or_else(|| NA.to_string(), |c| format!("{:.3} ± {:.3}", c.mean, c.std))
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

impl Report {
    pub fn build(
        outcomes: &[TestOutcome],
        registry: &MeasureRegistry,
        behavior: &ExpectedBehaviorTable,
        alpha: f64,
    ) -> Self {
        let records = reliability_records(outcomes, registry, behavior);
        let measures: BTreeSet<&str> = outcomes.iter().map(|o| o.spec.measure.as_str()).collect();
        let reliability = ReliabilityTable::build(measures.iter().copied(), &records);
        let consistency = Axis::ALL
            .into_iter()
            .map(|axis| (axis, consistency(&records, axis, alpha)))
            .collect();
        let comparisons = Category::ALL
            .into_iter()
            .map(|c| {
                let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for r in records.iter().filter(|r| r.category == c) {
                    groups.entry(r.measure.clone()).or_default().push(r.r_rel);
                }
                let result = statistical_comparison(c, &groups, alpha).map_err(|e| e.to_string());
                (c, result)
            })
            .collect();
        let embedded_measures = measures
            .iter()
            .filter(|m| registry.get(m).is_ok_and(|d| d.needs_embedding()))
            .map(|m| m.to_string())
            .collect();
        Self {
            reliability,
            consistency,
            comparisons,
            measure_runtimes: measure_runtimes(outcomes),
            embedder_runtimes: embedder_runtimes(outcomes),
            statistics: success_statistics(outcomes),
            failures: failure_counts(outcomes),
            embedded_measures,
            records,
        }
    }

    pub fn consistency_of(&self, axis: Axis, measure: &str, category: Category) -> Option<f64> {
        self.consistency
            .get(&axis)
            .and_then(|m| m.get(&(measure.to_string(), category)).copied())
    }

    /// Alphabetical table of mean ± std reliability per category.
    pub fn reliability_csv(&self) -> Result<String> {
        let mut header = vec!["measure"];
        header.extend(Category::ALL.iter().map(Category::as_str));
        let rows = self
            .reliability
            .rows
            .iter()
            .map(|(m, cells)| {
                let mut row = vec![m.clone()];
                row.extend(Category::ALL.iter().map(|c| fmt_cell(cells.get(c).copied().flatten())));
                row
            })
            .collect();
        csv_string(&header, rows)
    }

    /// One ranked (measure, reliability) column pair per category.
    pub fn ranking_csv(&self) -> Result<String> {
        let rankings: Vec<_> = Category::ALL.iter().map(|c| self.reliability.ranking(*c)).collect();
        let header_owned: Vec<String> = std::iter::once("rank".to_string())
            .chain(Category::ALL.iter().flat_map(|c| {
                [c.as_str().to_string(), format!("{}_r_rel", c.as_str())]
            }))
            .collect();
        let header: Vec<&str> = header_owned.iter().map(String::as_str).collect();
        let n = rankings.iter().map(Vec::len).max().unwrap_or(0);
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![(i + 1).to_string()];
                for r in &rankings {
                    let (m, cell) = &r[i];
                    row.push(m.clone());
                    row.push(fmt_cell(*cell));
                }
                row
            })
            .collect();
        csv_string(&header, rows)
    }

    /// `r_con` per category along both axes.
    pub fn consistency_csv(&self) -> Result<String> {
        let header_owned: Vec<String> = std::iter::once("measure".to_string())
            .chain(Category::ALL.iter().flat_map(|c| {
                Axis::ALL.map(|a| format!("{}_{}", c.as_str(), a.as_str()))
            }))
            .collect();
        let header: Vec<&str> = header_owned.iter().map(String::as_str).collect();
        let rows = self
            .reliability
            .rows
            .keys()
            .map(|m| {
                let mut row = vec![m.clone()];
                for c in Category::ALL {
                    for a in Axis::ALL {
                        row.push(self.consistency_of(a, m, c).map_or_else(|| NA.to_string(), fmt3));
                    }
                }
                row
            })
            .collect();
        csv_string(&header, rows)
    }

    fn runtime_csv(first: &str, table: &RuntimeTable) -> Result<String> {
        let rows = table
            .iter()
            .map(|((key, dataset), s)| {
                vec![
                    key.clone(),
                    dataset.clone(),
                    s.mean.map_or_else(|| NA.to_string(), fmt3),
                    s.std.map_or_else(|| NA.to_string(), fmt3),
                    s.valid.to_string(),
                    s.cached.to_string(),
                ]
            })
            .collect();
        csv_string(&[first, "dataset", "mean_s", "std_s", "valid", "cached"], rows)
    }

    pub fn runtime_measures_csv(&self) -> Result<String> {
        Self::runtime_csv("measure", &self.measure_runtimes)
    }

    pub fn runtime_embedders_csv(&self) -> Result<String> {
        Self::runtime_csv("embedder", &self.embedder_runtimes)
    }

    /// Attempted and successful tests per measure, with a total row.
    pub fn statistics_csv(&self) -> Result<String> {
        let rate = |s: &SuccessStats| s.rate().map_or_else(|| NA.to_string(), |r| format!("{r:.0}"));
        let mut rows: Vec<Vec<String>> = self
            .statistics
            .iter()
            .map(|(m, s)| vec![m.clone(), s.total.to_string(), s.successful.to_string(), rate(s)])
            .collect();
        let total = self.statistics.values().fold(SuccessStats::default(), |a, s| SuccessStats {
            total: a.total + s.total,
            successful: a.successful + s.successful,
        });
        rows.push(vec![
            "total".into(),
            total.total.to_string(),
            total.successful.to_string(),
            rate(&total),
        ]);
        csv_string(&["measure", "total", "successful", "success_rate_pct"], rows)
    }

    /// Failure reasons with counts; the measure-specific classes are always listed.
    pub fn failures_csv(&self) -> Result<String> {
        let mut counts: BTreeMap<String, usize> = [
            failures::NDB_OVER_UNDER.to_string(),
            "C_T: Cell x is missing test or training samples.".to_string(),
            failures::CONTEXT_FID.to_string(),
            failures::DETECTION_GMM.to_string(),
            failures::SPATIAL.to_string(),
            "Non-CUDA Runtime error".to_string(),
        ]
        .into_iter()
        .map(|k| (k, 0))
        .collect();
        for (k, v) in &self.failures {
            *counts.entry(k.clone()).or_insert(0) += v;
        }
        let rows = counts.into_iter().map(|(k, v)| vec![k, v.to_string()]).collect();
        csv_string(&["failure", "count"], rows)
    }

    pub fn cdd_json(&self, category: Category) -> Result<String> {
        match &self.comparisons[&category] {
            Ok(c) => c.to_json(),
            Err(reason) => Ok(serde_json::to_string_pretty(&Unavailable {
                category,
                unavailable: reason,
            })?),
        }
    }

    /// First measure in the ranking of `category` whose consistency along both axes is at
    /// least [`SELECTION_MIN_CONSISTENCY`] (an axis without enough groups does not screen).
    pub fn suggestion(&self, category: Category) -> Option<(String, MeanStd)> {
        self.reliability
            .ranking(category)
            .into_iter()
            .filter_map(|(m, cell)| cell.map(|c| (m, c)))
            .find(|(m, _)| {
                Axis::ALL.iter().all(|&a| {
                    self.consistency_of(a, m, category)
                        .is_none_or(|v| v >= SELECTION_MIN_CONSISTENCY)
                })
            })
    }

    pub fn top_ranked(&self, category: Category) -> Option<(String, MeanStd)> {
        self.reliability
            .ranking(category)
            .into_iter()
            .find_map(|(m, cell)| cell.map(|c| (m, c)))
    }

    fn mean_runtime(&self, measure: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .measure_runtimes
            .iter()
            .filter(|((m, _), _)| m == measure)
            .filter_map(|(_, s)| s.mean)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// The selection procedure applied to this experiment's tables.
    pub fn selection_guide(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Measure selection guide\n");
        let _ = writeln!(
            out,
            "For every category, measures are taken in order of decreasing reliability. A measure \
             is passed over when its consistency across seeds or datasets is below {SELECTION_MIN_CONSISTENCY}. \
             Runtime, embedder dependence and success rate are listed for the final choice.\n"
        );
        for c in Category::ALL {
            let _ = writeln!(out, "## {}\n", capitalize(c.as_str()));
            let ranking = self.reliability.ranking(c);
            let mut rejected = Vec::new();
            let mut chosen = None;
            for (m, cell) in ranking.into_iter() {
                let Some(cell) = cell else { continue };
                let weak: Vec<String> = Axis::ALL
                    .iter()
                    .filter_map(|&a| {
                        self.consistency_of(a, &m, c)
                            .filter(|&v| v < SELECTION_MIN_CONSISTENCY)
                            .map(|v| format!("r_con({}) = {v:.3}", a.as_str()))
                    })
                    .collect();
                if weak.is_empty() {
                    chosen = Some((m, cell));
                    break;
                }
                rejected.push(format!("{m} ({})", weak.join(", ")));
            }
            for r in &rejected {
                let _ = writeln!(out, "- passed over: {r}");
            }
            match chosen {
                Some((m, cell)) => {
                    let runtime = self
                        .mean_runtime(&m)
                        .map_or_else(|| NA.to_string(), |t| format!("{t:.3} s"));
                    let success = self
                        .statistics
                        .get(&m)
                        .and_then(SuccessStats::rate)
                        .map_or_else(|| NA.to_string(), |r| format!("{r:.0}%"));
                    let embedder = if self.embedded_measures.contains(&m) {
                        "yes"
                    } else {
                        "no"
                    };
                    let con = |a: Axis| {
                        self.consistency_of(a, &m, c)
                            .map_or_else(|| NA.to_string(), fmt3)
                    };
                    let _ = writeln!(
                        out,
                        "- suggested: **{m}** with r_rel = {:.3} ± {:.3}, r_con(dataset) = {}, r_con(seed) = {}",
                        cell.mean,
                        cell.std,
                        con(Axis::Dataset),
                        con(Axis::Seed)
                    );
                    let _ = writeln!(
                        out,
                        "- mean runtime {runtime}, needs an embedder: {embedder}, success rate {success}"
                    );
                }
                None => {
                    let _ = writeln!(out, "- no measure qualifies in this category");
                }
            }
            let _ = writeln!(out);
        }
        out
    }

    /// `(file name, contents)` of every report file.
    pub fn files(&self) -> Result<Vec<(String, String)>> {
        let mut files = vec![
            ("reliability.csv".to_string(), self.reliability_csv()?),
            ("ranking.csv".to_string(), self.ranking_csv()?),
            ("consistency.csv".to_string(), self.consistency_csv()?),
            ("runtime_measures.csv".to_string(), self.runtime_measures_csv()?),
            ("runtime_embedders.csv".to_string(), self.runtime_embedders_csv()?),
            ("statistics.csv".to_string(), self.statistics_csv()?),
            ("failures.csv".to_string(), self.failures_csv()?),
        ];
        for c in Category::ALL {
            files.push((format!("cdd_{}.json", c.as_str()), self.cdd_json(c)?));
        }
        files.push(("selection_guide.md".to_string(), self.selection_guide()));
        Ok(files)
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    chars
        .next()
        .map(|f| f.to_uppercase().chain(chars).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::super::tests::outcome;
    use super::*;
    use crate::kernels::stats::ALPHA;
    use crate::model::{Score, Status, TransformKind};

    fn experiment() -> Vec<TestOutcome> {
        let mut out = Vec::new();
        for (seed, shift) in [(1u64, 0.0), (2, 0.1), (3, 0.2)] {
            for (measure, slope) in [("jsd", 1.0), ("wd_on_pmf", -1.0), ("icd", 0.0)] {
                let scores = (0..11)
                    .map(|i| Score::Real(shift + slope * i as f64 + 0.01 * ((i * 7) % 3) as f64))
                    .collect();
                let mut o = outcome(measure, vec![TransformKind::Shuffle, TransformKind::GaussianNoise], scores);
                o.spec.seed = seed;
                o.test_id = o.spec.id();
                out.push(o);
            }
        }
        let mut failed = outcome("ndbou", vec![TransformKind::GaussianNoise], vec![Score::Real(0.0); 3]);
        failed.status = Status::Failed;
        failed.failure_reason = Some(failures::NDB_OVER_UNDER.to_string());
        out.push(failed);
        out
    }

    fn report() -> Report {
        Report::build(
            &experiment(),
            &MeasureRegistry::builtin(),
            &ExpectedBehaviorTable::standard(),
            ALPHA,
        )
    }

    #[test]
    fn every_file_is_rendered() {
        let files = report().files().unwrap();
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names.len(), 12);
        for (name, body) in &files {
            assert!(!body.trim().is_empty(), "{name}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(report().files().unwrap(), report().files().unwrap());
    }

    #[test]
    fn rising_divergence_ranks_first_in_fidelity() {
        let r = report();
        let (top, cell) = r.top_ranked(Category::Fidelity).unwrap();
        assert_eq!(top, "jsd");
        assert_eq!(cell.mean, 1.0);
        assert_eq!(r.statistics["ndbou"], SuccessStats { total: 1, successful: 0 });
        assert!(r.failures_csv().unwrap().contains(",1\n"));
        assert!(r.selection_guide().contains("suggested: **jsd**"));
    }
}
