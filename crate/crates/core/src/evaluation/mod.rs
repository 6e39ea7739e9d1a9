//! Post-hoc evaluation of completed tests: reliability and consistency indicators, rankings,
//! statistical comparison, runtime and failure tables, and the report files built from them.

pub mod comparison;
pub mod consistency;
pub mod reliability;
pub mod report;
pub mod tables;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::model::{Category, ExpectedBehaviorTable, MeasureRegistry, Score, Status, TestSpec};

pub use comparison::{statistical_comparison, Comparison};
pub use consistency::{consistency, consistency_of_groups, Axis};
pub use reliability::{
    reliability_boolean, reliability_real, reliability_real_with, trajectory_reliability,
    MedianRule,
};
pub use report::{Report, SELECTION_MIN_CONSISTENCY};
pub use tables::{MeanStd, ReliabilityTable, RuntimeStats};

/// What evaluation needs to know about one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub spec: TestSpec,
    pub status: Status,
    pub scores: Vec<Score>,
    /// Measure runtime per κ step, in seconds.
    pub runtimes: Vec<f64>,
    pub runtime_cached: Vec<bool>,
    /// Embedding runtime per κ step, in seconds (empty for embedder-free measures).
    pub embed_runtimes: Vec<f64>,
    pub embed_cached: Vec<bool>,
    pub failure_reason: Option<String>,
}

/// `r_rel(t)` of one test in one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRecord {
    pub measure: String,
    pub category: Category,
    pub test_id: String,
    pub dataset: String,
    pub seed: u64,
    pub chain: String,
    pub r_rel: f64,
}

/// One record per successful test and category with a defined expectation.
pub fn reliability_records(
    outcomes: &[TestOutcome],
    registry: &MeasureRegistry,
    behavior: &ExpectedBehaviorTable,
) -> Vec<ReliabilityRecord> {
    let mut out = Vec::new();
    for o in outcomes.iter().filter(|o| o.status == Status::Successful) {
        let Ok(descriptor) = registry.get(&o.spec.measure) else {
            warn!("test {} names unregistered measure {}", o.test_id, o.spec.measure);
            continue;
        };
        if o.scores.len() != o.spec.kappa_grid.len() {
            warn!("test {} has an incomplete trajectory", o.test_id);
            continue;
        }
        for category in Category::ALL {
            let expectation = behavior.for_chain(&o.spec.transformation_chain, category);
            if expectation == crate::model::Expectation::NotApplicable {
                continue;
            }
            match trajectory_reliability(descriptor, &o.scores, expectation) {
                Ok(r_rel) => out.push(ReliabilityRecord {
                    measure: o.spec.measure.clone(),
                    category,
                    test_id: o.test_id.clone(),
                    dataset: o.spec.dataset.clone(),
                    seed: o.spec.seed,
                    chain: o.spec.chain_label(),
                    r_rel,
                }),
                Err(e) => warn!("test {}: no reliability in {category}: {e}", o.test_id),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{kappa_grid, TransformKind};

    pub(crate) fn outcome(measure: &str, chain: Vec<TransformKind>, scores: Vec<Score>) -> TestOutcome {
        let spec = TestSpec {
            dataset: "sine".into(),
            transformation_chain: chain,
            measure: measure.into(),
            embedder: None,
            seed: 42,
            kappa_grid: kappa_grid(scores.len()),
        };
        TestOutcome {
            test_id: spec.id(),
            spec,
            status: Status::Successful,
            runtimes: vec![0.01; scores.len()],
            runtime_cached: vec![false; scores.len()],
            embed_runtimes: Vec::new(),
            embed_cached: Vec::new(),
            scores,
            failure_reason: None,
        }
    }

    #[test]
    fn records_follow_the_behavior_table() {
        let reg = MeasureRegistry::builtin();
        let behavior = ExpectedBehaviorTable::standard();
        let rising: Vec<Score> = (0..11).map(|i| Score::Real(i as f64)).collect();
        let o = outcome(
            "jsd",
            vec![TransformKind::Shuffle, TransformKind::GaussianNoise],
            rising,
        );
        let recs = reliability_records(&[o], &reg, &behavior);
        assert_eq!(recs.len(), 4);
        let get = |c| recs.iter().find(|r| r.category == c).unwrap().r_rel;
        // A rising divergence worsens: fidelity and representativeness expect that.
        assert_eq!(get(Category::Fidelity), 1.0);
        assert_eq!(get(Category::Representativeness), 1.0);
        assert_eq!(get(Category::Privacy), 0.0);
        assert_eq!(recs[0].chain, "shuffle+gn_moderate");
    }

    #[test]
    fn not_applicable_categories_and_failed_tests_are_excluded() {
        let reg = MeasureRegistry::builtin();
        let behavior = ExpectedBehaviorTable::standard();
        let flat = vec![Score::Real(1.0); 11];
        let o = outcome("jsd", vec![TransformKind::LabelCorruption], flat.clone());
        let recs = reliability_records(&[o], &reg, &behavior);
        assert!(recs.iter().all(|r| r.category != Category::Privacy));
        assert_eq!(recs.len(), 3);
        let mut failed = outcome("jsd", vec![TransformKind::GaussianNoise], flat);
        failed.status = Status::Failed;
        assert!(reliability_records(&[failed], &reg, &behavior).is_empty());
    }
}
