//! Enumeration, execution, caching, time limits and recovery of experiments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use evalbench::cache::Cache;
use evalbench::executor::{enumerate_tests, execute, run_experiment, Mode, RunContext, StepHook};
use evalbench::{ExperimentConfig, TestRecord, Workspace};
use evalbench_core::data::{generate_sine, SineParams};
use evalbench_core::model::{
    kappa_grid, Dataset, DatasetInfo, MeasureRegistry, Status, TestSpec, TransformKind,
};

fn sine(name: &str, n: usize) -> Dataset {
    let mut ds = generate_sine(&SineParams::default(), n, 16, 2, 3).unwrap();
    ds.name = name.to_string();
    ds
}

fn spec(measure: &str, chain: Vec<TransformKind>, seed: u64) -> TestSpec {
    TestSpec {
        dataset: "sine".into(),
        transformation_chain: chain,
        measure: measure.into(),
        embedder: None,
        seed,
        kappa_grid: kappa_grid(11),
    }
}

fn gn() -> Vec<TransformKind> {
    vec![TransformKind::GaussianNoise]
}

fn context(cache: Cache) -> RunContext {
    RunContext::new(vec![sine("sine", 80)], cache)
}

fn count_files(dir: &Path) -> usize {
    let Ok(entries) = fs::read_dir(dir) else {
        return 0;
    };
    entries
        .map(|e| {
            let p = e.unwrap().path();
            if p.is_dir() {
                count_files(&p)
            } else {
                1
            }
        })
        .sum()
}

const TOY: &str = "
name: toy
catalog:
  - {name: a, source: {kind: generated_sine, n: 60, l: 16, d: 2, seed: 1}}
  - {name: b, source: {kind: generated_sine, n: 60, l: 16, d: 2, seed: 2}}
datasets: ALL
transformations: [gn_moderate, [shuffle, moving_average]]
measures: [auto_corr, temporal]
seeds: [1, 2]
kappa_steps: 3
";

fn infos(names: &[&str], labeled: bool) -> BTreeMap<String, DatasetInfo> {
    names
        .iter()
        .map(|n| {
            let info = DatasetInfo {
                name: n.to_string(),
                n: 60,
                length: 16,
                channels: 2,
                has_labels: labeled,
            };
            (n.to_string(), info)
        })
        .collect()
}

#[test]
fn toy_product_has_sixteen_specs_in_stable_order() {
    let reg = MeasureRegistry::builtin();
    let config = ExperimentConfig::parse(TOY, &reg).unwrap();
    let a = enumerate_tests(&config, &infos(&["a", "b"], true), &reg).unwrap();
    let b = enumerate_tests(&config, &infos(&["a", "b"], true), &reg).unwrap();
    assert_eq!(a.len(), 16);
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.status == Status::Todo));
    let ids: std::collections::BTreeSet<&str> = a.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), 16);
}

#[test]
fn unlabeled_data_skips_label_transformations() {
    let reg = MeasureRegistry::builtin();
    let text = TOY.replace("[gn_moderate, [shuffle, moving_average]]", "[gn_moderate, mode_dropping]");
    let config = ExperimentConfig::parse(&text, &reg).unwrap();
    let records = enumerate_tests(&config, &infos(&["a", "b"], false), &reg).unwrap();
    let skipped: Vec<&TestRecord> = records.iter().filter(|r| r.status == Status::Skipped).collect();
    assert_eq!(skipped.len(), 8);
    assert!(skipped
        .iter()
        .all(|r| r.spec.transformation_chain == [TransformKind::ModeDropping]));
    assert!(skipped[0].skip_reason.as_deref().unwrap().contains("labeled"));
}

#[test]
fn embedders_multiply_only_embedded_measures() {
    let reg = MeasureRegistry::builtin();
    let text = TOY.replace("[auto_corr, temporal]", "[auto_corr, Coverage]") + "embedders: [concat, statfeat]\n";
    let config = ExperimentConfig::parse(&text, &reg).unwrap();
    let records = enumerate_tests(&config, &infos(&["a", "b"], true), &reg).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2 + 2 * 2 * 2 * 2);
    assert!(records
        .iter()
        .all(|r| (r.spec.measure == "Coverage") == r.spec.embedder.is_some()));
}

#[test]
fn happy_path_yields_a_full_trajectory() {
    let ctx = Arc::new(context(Cache::disabled()));
    let r = execute(&ctx, TestRecord::todo(spec("auto_corr", gn(), 7)));
    assert_eq!(r.status, Status::Successful, "{:?}", r.failure_reason);
    assert_eq!(r.scores.len(), 11);
    assert_eq!(r.runtimes.len(), 11);
    assert!(r.finished_at.is_some());
}

#[test]
fn embedded_measures_record_embedding_runtimes() {
    let ctx = Arc::new(context(Cache::disabled()));
    let mut s = spec("Coverage", gn(), 7);
    s.embedder = Some(evalbench_core::model::EmbedderKind::StatFeat);
    let r = execute(&ctx, TestRecord::todo(s));
    assert_eq!(r.status, Status::Successful, "{:?}", r.failure_reason);
    assert_eq!(r.embed_runtimes.len(), 11);
}

#[test]
fn failure_keeps_partial_scores_and_the_reason() {
    let mut ctx = context(Cache::disabled());
    let hook: StepHook = Arc::new(|_, step| {
        if step == 3 {
            Err("injected failure at κ = 0.3".to_string())
        } else {
            Ok(())
        }
    });
    ctx.step_hook = Some(hook);
    let r = execute(&Arc::new(ctx), TestRecord::todo(spec("auto_corr", gn(), 7)));
    assert_eq!(r.status, Status::Failed);
    assert_eq!(r.scores.len(), 3);
    assert_eq!(r.failure_reason.as_deref(), Some("injected failure at κ = 0.3"));
}

#[test]
fn panics_become_failures() {
    let mut ctx = context(Cache::disabled());
    let hook: StepHook = Arc::new(|_, step| {
        if step == 1 {
            panic!("boom");
        }
        Ok(())
    });
    ctx.step_hook = Some(hook);
    let r = execute(&Arc::new(ctx), TestRecord::todo(spec("auto_corr", gn(), 7)));
    assert_eq!(r.status, Status::Failed);
    assert_eq!(r.scores.len(), 1);
    assert!(r.failure_reason.unwrap().contains("boom"));
}

#[test]
fn time_limit_is_enforced_within_grace() {
    let mut ctx = context(Cache::disabled());
    ctx.time_limit = Duration::from_millis(600);
    let hook: StepHook = Arc::new(|_, _| {
        std::thread::sleep(Duration::from_secs(3));
        Ok(())
    });
    ctx.step_hook = Some(hook);
    let started = Instant::now();
    let r = execute(&Arc::new(ctx), TestRecord::todo(spec("auto_corr", gn(), 7)));
    let elapsed = started.elapsed();
    assert!(elapsed <= Duration::from_millis(660), "took {elapsed:?}");
    assert_eq!(r.status, Status::Failed);
    let reason = r.failure_reason.unwrap();
    assert!(reason.starts_with("Time limit of ") && reason.ends_with(" minutes exceeded"), "{reason}");
    assert_eq!(
        evalbench_core::evaluation::tables::failure_category(&reason),
        reason
    );
}

#[test]
fn whole_minute_limits_read_naturally() {
    assert_eq!(
        evalbench::executor::time_limit_reason(evalbench::executor::minutes(120.0)),
        "Time limit of 120 minutes exceeded"
    );
}

#[test]
fn cached_rerun_gives_identical_scores() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Arc::new(context(Cache::new(dir.path(), true)));
    let first = execute(&ctx, TestRecord::todo(spec("temporal", gn(), 7)));
    let second = execute(&ctx, TestRecord::todo(spec("temporal", gn(), 7)));
    assert_eq!(first.scores, second.scores);
    assert!(first.runtime_cached.iter().all(|c| !c));
    assert!(second.runtime_cached.iter().all(|&c| c));
    assert_eq!(first.runtimes, second.runtimes);
}

#[test]
fn transformations_are_shared_between_tests() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Arc::new(context(Cache::new(dir.path(), true)));
    let datasets = dir.path().join("datasets");
    execute(&ctx, TestRecord::todo(spec("auto_corr", gn(), 7)));
    assert_eq!(count_files(&datasets), 11);
    execute(&ctx, TestRecord::todo(spec("temporal", gn(), 7)));
    assert_eq!(count_files(&datasets), 11, "same (dataset, chain, κ, seed) must hit");
    execute(&ctx, TestRecord::todo(spec("auto_corr", gn(), 8)));
    assert_eq!(count_files(&datasets), 22, "a different seed must miss");
}

#[test]
fn corrupt_entries_are_recomputed_identically() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Arc::new(context(Cache::new(dir.path(), true)));
    let first = execute(&ctx, TestRecord::todo(spec("auto_corr", gn(), 7)));
    let mut files = Vec::new();
    collect(&dir.path().join("datasets"), &mut files);
    files.sort();
    let victim = files[5].clone();
    let original = fs::read(&victim).unwrap();
    fs::write(&victim, b"garbage").unwrap();
    let second = execute(&ctx, TestRecord::todo(spec("temporal", gn(), 7)));
    assert_eq!(second.status, Status::Successful);
    assert_eq!(fs::read(&victim).unwrap(), original);
    assert_eq!(first.scores.len(), 11);
}

fn collect(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn results(ws: &Workspace) -> Vec<(String, Status, Vec<evalbench_core::model::Score>)> {
    ws.records()
        .unwrap()
        .into_iter()
        .map(|r| (r.id, r.status, r.scores))
        .collect()
}

#[test]
fn modes_agree_and_recovery_completes_without_duplicates() {
    let reg = MeasureRegistry::builtin();
    let config = ExperimentConfig::parse(TOY, &reg).unwrap();
    let root = tempfile::tempdir().unwrap();
    let quiet = |_: &evalbench::Counts| {};

    let seq = Workspace::new(&root.path().join("seq"), "toy");
    let counts = run_experiment(&config, &seq, Mode::Sequential, &quiet).unwrap();
    assert_eq!(counts.successful, 16);
    let par = Workspace::new(&root.path().join("par"), "toy");
    run_experiment(&config, &par, Mode::Parallel(3), &quiet).unwrap();
    assert_eq!(results(&seq), results(&par));

    // Simulate an interruption: two tests were running, one was never started.
    let rec = Workspace::new(&root.path().join("rec"), "toy");
    run_experiment(&config, &rec, Mode::Sequential, &quiet).unwrap();
    let mut records = rec.records().unwrap();
    for r in records.iter_mut().take(2) {
        r.status = Status::Ongoing;
        r.scores.truncate(1);
        rec.save(r).unwrap();
    }
    fs::remove_file(rec.record_path(&records[2].id)).unwrap();
    let counts = run_experiment(&config, &rec, Mode::Parallel(2), &quiet).unwrap();
    assert_eq!(counts.successful, 16);
    assert_eq!(counts.total(), 16);
    assert_eq!(results(&rec), results(&seq));
}

#[test]
fn a_live_lock_blocks_a_second_run() {
    let reg = MeasureRegistry::builtin();
    let config = ExperimentConfig::parse(TOY, &reg).unwrap();
    let root = tempfile::tempdir().unwrap();
    let ws = Workspace::new(root.path(), "toy");
    let _held = ws.lock().unwrap();
    let err = run_experiment(&config, &ws, Mode::Sequential, &|_| {}).unwrap_err();
    assert!(err.to_string().contains("locked"), "{err}");
}
