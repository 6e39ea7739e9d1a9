//! Test enumeration and execution: the per-κ transform, scale/embed, measure loop, time
//! limits, failure capture, and the sequential and parallel schedulers.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use evalbench_core::data::{self, PreparedDataset};
use evalbench_core::embed::{FittedEmbedder, UnitScaler};
use evalbench_core::measures::{compute, EmbeddedSets, MeasureInput};
use evalbench_core::model::{
    applicable, kappa_grid, Dataset, DatasetInfo, EmbeddedDataset, EmbedderKind, InputForm,
    MeasureDescriptor, MeasureRegistry, Score, SplitNeeds, Status, TestSpec,
};
use evalbench_core::transforms::apply_chain;
use evalbench_core::Error as CoreError;
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::cache::{key_of, Cache, CachedScore};
use crate::config::ExperimentConfig;
use crate::store::{now, reconcile, TestRecord, Workspace};

/// A preprocessed dataset with its content hash, shared read-only by all tests.
#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub hash: String,
}

/// Called before each measure computation with the test and its κ index; an error fails the step.
/// Used to inject faults and delays in tests.
pub type StepHook = Arc<dyn Fn(&TestSpec, usize) -> Result<(), String> + Send + Sync>;

/// Everything a test needs besides its spec.
pub struct RunContext {
    pub registry: MeasureRegistry,
    pub datasets: BTreeMap<String, LoadedDataset>,
    pub cache: Cache,
    pub record_runtime: bool,
    pub time_limit: Duration,
    pub step_hook: Option<StepHook>,
}

impl RunContext {
    pub fn new(datasets: Vec<Dataset>, cache: Cache) -> Self {
        Self {
            registry: MeasureRegistry::builtin(),
            datasets: datasets
                .into_iter()
                .map(|ds| {
                    let hash = ds.content_hash();
                    (ds.name.clone(), LoadedDataset { dataset: ds, hash })
                })
                .collect(),
            cache,
            record_runtime: true,
            time_limit: minutes(crate::config::DEFAULT_TIME_LIMIT_MINUTES),
            step_hook: None,
        }
    }

    pub fn infos(&self) -> BTreeMap<String, DatasetInfo> {
        self.datasets
            .iter()
            .map(|(k, v)| (k.clone(), DatasetInfo::from(&v.dataset)))
            .collect()
    }
}

pub fn minutes(m: f64) -> Duration {
    Duration::from_secs_f64(m * 60.0)
}

/// Failure reason of a test stopped by the time limit.
pub fn time_limit_reason(limit: Duration) -> String {
    let m = limit.as_secs_f64() / 60.0;
    if (m - m.round()).abs() < 1e-9 {
        format!("Time limit of {} minutes exceeded", m.round() as u64)
    } else {
        format!("Time limit of {m} minutes exceeded")
    }
}

/// Loads each configured dataset, reusing the prepared copy in the workspace cache.
pub fn prepare_datasets(config: &ExperimentConfig, cache_dir: &Path) -> Result<Vec<Dataset>> {
    let dir = cache_dir.join("prepared");
    let mut out = Vec::new();
    for name in &config.datasets {
        let spec = config
            .dataset_spec(name)
            .with_context(|| format!("dataset `{name}` missing from catalog"))?;
        let stem = key_of(spec);
        let prepared = match data::load_prepared(&dir, &stem) {
            Ok(p) => p,
            Err(_) => {
                info!("preprocessing dataset {name}");
                let p: PreparedDataset = data::load(spec, Path::new("."))
                    .with_context(|| format!("preparing dataset `{name}`"))?;
                data::save_prepared(&p, &dir, &stem)?;
                p
            }
        };
        out.push(prepared.dataset);
    }
    Ok(out)
}

/// The cartesian product datasets × chains × measures × embedders × seeds, in config order.
/// Embedders multiply only embedding-dependent measures. Inapplicable tests come back skipped.
pub fn enumerate_tests(
    config: &ExperimentConfig,
    infos: &BTreeMap<String, DatasetInfo>,
    registry: &MeasureRegistry,
) -> Result<Vec<TestRecord>> {
    let grid = kappa_grid(config.kappa_steps);
    let mut out = Vec::new();
    for dataset in &config.datasets {
        for chain in &config.transformations {
            for measure in &config.measures {
                let descriptor = registry.get(measure)?;
                let embedders: Vec<Option<EmbedderKind>> = if descriptor.needs_embedding() {
                    config.embedders.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for embedder in embedders {
                    for &seed in &config.seeds {
                        let spec = TestSpec {
                            dataset: dataset.clone(),
                            transformation_chain: chain.clone(),
                            measure: descriptor.id.clone(),
                            embedder,
                            seed,
                            kappa_grid: grid.clone(),
                        };
                        spec.validate()?;
                        let verdict = applicable(&spec, infos, registry)?;
                        out.push(if verdict.applicable {
                            TestRecord::todo(spec)
                        } else {
                            let reason = verdict.reason.unwrap_or_else(|| "inapplicable".into());
                            TestRecord::skipped(spec, reason)
                        });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        bail!("the configuration enumerates no tests");
    }
    Ok(out)
}

/// Per-step results accumulated while a test runs; partial on failure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub scores: Vec<Score>,
    pub runtimes: Vec<f64>,
    pub runtime_cached: Vec<bool>,
    pub embed_runtimes: Vec<f64>,
    pub embed_cached: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepFailure {
    /// Raised at runtime by an applicability check; the test is skipped.
    Inapplicable(String),
    Failed(String),
}

impl From<CoreError> for StepFailure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Inapplicable(m) => StepFailure::Inapplicable(m),
            CoreError::Measure(m) => StepFailure::Failed(m),
            other => StepFailure::Failed(other.to_string()),
        }
    }
}

struct Embedding<'a> {
    kind: EmbedderKind,
    fitted: Option<FittedEmbedder>,
    train: &'a Dataset,
}

impl Embedding<'_> {
    fn fitted(&mut self) -> Result<&FittedEmbedder, CoreError> {
        if self.fitted.is_none() {
            self.fitted = Some(FittedEmbedder::fit(self.kind, self.train)?);
        }
        Ok(self.fitted.as_ref().expect("fitted above"))
    }

    /// Returns the embedding and whether it came from the cache.
    fn embed(&mut self, cache: &Cache, key: &str, ds: &Dataset) -> Result<(EmbeddedDataset, bool), CoreError> {
        if let Some(e) = cache.get_embedded(key) {
            return Ok((e, true));
        }
        let e = self.fitted()?.embed(ds)?;
        cache.put_embedded(key, &e);
        Ok((e, false))
    }
}

#[derive(Serialize)]
struct SplitKey<'a> {
    dataset: &'a str,
    substitute: bool,
    held_out: bool,
    seed: u64,
}

/// Runs the κ loop of one test. Scores and runtimes are appended to `log` as they complete.
/// `cancel` is checked before every step, as is the deadline.
pub fn run_steps(
    ctx: &RunContext,
    spec: &TestSpec,
    log: &Mutex<StepLog>,
    cancel: &AtomicBool,
    deadline: Instant,
) -> Result<(), StepFailure> {
    let descriptor: &MeasureDescriptor = ctx.registry.get(&spec.measure)?;
    let loaded = ctx
        .datasets
        .get(&spec.dataset)
        .ok_or_else(|| CoreError::UnknownId(spec.dataset.clone()))?;
    let needs = SplitNeeds::for_test(&spec.transformation_chain, descriptor);
    let split_key = SplitKey {
        dataset: &loaded.hash,
        substitute: needs.substitute,
        held_out: needs.held_out,
        seed: spec.seed,
    };
    let splits = data::split(&loaded.dataset, needs, spec.seed)?;
    let held_out = if descriptor.needs_held_out {
        splits.held_out.as_ref()
    } else {
        None
    };

    let scaler = (descriptor.input == InputForm::Scaled).then(|| UnitScaler::fit(&splits.train));
    let scaled_train = scaler.as_ref().map(|s| s.transform(&splits.train)).transpose()?;
    let scaled_held = match (&scaler, held_out) {
        (Some(s), Some(h)) => Some(s.transform(h)?),
        _ => None,
    };
    let embedder = if descriptor.needs_embedding() {
        let kind = spec.embedder.ok_or_else(|| {
            StepFailure::Failed(format!("{} needs an embedder", descriptor.id))
        })?;
        Some(kind)
    } else {
        None
    };
    let mut embedding = embedder.map(|kind| Embedding {
        kind,
        fitted: None,
        train: &splits.train,
    });
    let mut base_embeddings: Option<(EmbeddedDataset, Option<EmbeddedDataset>)> = None;
    let chain_ids: Vec<&str> = spec.transformation_chain.iter().map(|t| t.config_id()).collect();

    for (step, &kappa) in spec.kappa_grid.iter().enumerate() {
        if cancel.load(Ordering::Relaxed) || Instant::now() >= deadline {
            return Err(StepFailure::Failed(time_limit_reason(ctx.time_limit)));
        }
        let transform_key = key_of(&("transform", &split_key, &chain_ids, kappa.to_bits()));
        let score_key = key_of(&(
            "score",
            &transform_key,
            &descriptor.id,
            embedder.map(|e| e.id()),
        ));
        if let Some(hit) = ctx.cache.get_score(&score_key) {
            let mut log = log.lock().expect("step log");
            log.scores.push(hit.score);
            log.runtimes.push(hit.runtime);
            log.runtime_cached.push(true);
            if embedder.is_some() {
                log.embed_runtimes.push(0.0);
                log.embed_cached.push(true);
            }
            continue;
        }

        let synth = match ctx.cache.get_dataset(&transform_key) {
            Some(ds) => ds,
            None => {
                let ds = apply_chain(
                    &spec.transformation_chain,
                    &splits.train,
                    splits.substitute.as_ref(),
                    kappa,
                    spec.seed,
                )?;
                ctx.cache.put_dataset(&transform_key, &ds);
                ds
            }
        };

        let mut embed_step: Option<(f64, bool)> = None;
        let mut synth_embedded: Option<EmbeddedDataset> = None;
        if let (Some(emb), Some(kind)) = (embedding.as_mut(), embedder) {
            let started = Instant::now();
            if base_embeddings.is_none() {
                let key = |role: &str| key_of(&("embed", &split_key, role, kind.id()));
                let (train_e, _) = emb.embed(&ctx.cache, &key("train"), &splits.train)?;
                let held_e = match held_out {
                    Some(h) => Some(emb.embed(&ctx.cache, &key("held_out"), h)?.0),
                    None => None,
                };
                base_embeddings = Some((train_e, held_e));
            }
            let key = key_of(&("embed", &transform_key, kind.id()));
            let (e, cached) = emb.embed(&ctx.cache, &key, &synth)?;
            synth_embedded = Some(e);
            embed_step = Some((started.elapsed().as_secs_f64(), cached));
        }

        let scaled_synth = scaler.as_ref().map(|s| s.transform(&synth)).transpose()?;
        let train = scaled_train.as_ref().unwrap_or(&splits.train);
        let synth_in = scaled_synth.as_ref().unwrap_or(&synth);
        let mut input = MeasureInput::new(train, synth_in, spec.seed);
        if let Some(h) = scaled_held.as_ref().or(held_out) {
            input = input.with_held_out(h);
        }
        if let (Some((train_e, held_e)), Some(synth_e)) = (&base_embeddings, &synth_embedded) {
            input = input.with_embedded(EmbeddedSets {
                train: train_e,
                synth: synth_e,
                held_out: held_e.as_ref(),
            });
        }
        if let Some(hook) = &ctx.step_hook {
            hook(spec, step).map_err(StepFailure::Failed)?;
        }
        let started = Instant::now();
        let output = compute(descriptor, &input)?;
        let runtime = started.elapsed().as_secs_f64();
        ctx.cache.put_score(
            &score_key,
            &CachedScore {
                score: output.score,
                runtime,
            },
        );
        let mut log = log.lock().expect("step log");
        log.scores.push(output.score);
        log.runtimes.push(runtime);
        log.runtime_cached.push(false);
        if let Some((t, cached)) = embed_step {
            log.embed_runtimes.push(t);
            log.embed_cached.push(cached);
        }
    }
    Ok(())
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

/// Runs `work` on its own thread and gives up on it once `limit` has passed. A panic inside
/// `work` becomes a failure. The abandoned thread is told to stop through the cancel flag.
pub fn run_with_limit<F>(limit: Duration, timeout_reason: String, work: F) -> Result<(), StepFailure>
where
    F: FnOnce(&AtomicBool) -> Result<(), StepFailure> + Send + 'static,
{
    let cancel = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let flag = Arc::clone(&cancel);
    let spawned = thread::Builder::new()
        .name("evalbench-test".into())
        .spawn(move || {
            let result = panic::catch_unwind(AssertUnwindSafe(|| work(&flag)))
                .unwrap_or_else(|p| Err(StepFailure::Failed(format!("panic: {}", panic_message(&*p)))));
            let _ = tx.send(result);
        });
    if let Err(e) = spawned {
        return Err(StepFailure::Failed(format!("could not start test thread: {e}")));
    }
    match rx.recv_timeout(limit) {
        Ok(result) => result,
        Err(mpsc::RecvTimeoutError::Timeout) => {
            cancel.store(true, Ordering::Relaxed);
            Err(StepFailure::Failed(timeout_reason))
        }
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            Err(StepFailure::Failed("test thread exited without a result".into()))
        }
    }
}

/// Executes one test to a terminal record.
pub fn execute(ctx: &Arc<RunContext>, mut record: TestRecord) -> TestRecord {
    let log = Arc::new(Mutex::new(StepLog::default()));
    let limit = ctx.time_limit;
    let deadline = Instant::now() + limit;
    let result = {
        let ctx = Arc::clone(ctx);
        let log = Arc::clone(&log);
        let spec = record.spec.clone();
        run_with_limit(limit, time_limit_reason(limit), move |cancel| {
            run_steps(&ctx, &spec, &log, cancel, deadline)
        })
    };
    let steps = log.lock().map(|l| l.clone()).unwrap_or_default();
    record.scores = steps.scores;
    if ctx.record_runtime {
        record.runtimes = steps.runtimes;
        record.runtime_cached = steps.runtime_cached;
        record.embed_runtimes = steps.embed_runtimes;
        record.embed_cached = steps.embed_cached;
    }
    match result {
        Ok(()) => record.status = Status::Successful,
        Err(StepFailure::Inapplicable(reason)) => {
            record.status = Status::Skipped;
            record.skip_reason = Some(reason);
        }
        Err(StepFailure::Failed(reason)) => {
            debug!("test {} failed: {reason}", record.id);
            record.status = Status::Failed;
            record.failure_reason = Some(reason);
        }
    }
    record.finished_at = Some(now());
    record
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel(usize),
}

/// Live status counts of an experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub todo: usize,
    pub ongoing: usize,
    pub successful: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl Counts {
    pub fn of(records: &[TestRecord]) -> Self {
        let mut c = Counts::default();
        for r in records {
            c.add(r.status);
        }
        c
    }

    fn add(&mut self, s: Status) {
        match s {
            Status::Todo => self.todo += 1,
            Status::Ongoing => self.ongoing += 1,
            Status::Successful => self.successful += 1,
            Status::Failed => self.failed += 1,
            Status::Skipped => self.skipped += 1,
        }
    }

    fn remove(&mut self, s: Status) {
        let slot = match s {
            Status::Todo => &mut self.todo,
            Status::Ongoing => &mut self.ongoing,
            Status::Successful => &mut self.successful,
            Status::Failed => &mut self.failed,
            Status::Skipped => &mut self.skipped,
        };
        *slot = slot.saturating_sub(1);
    }

    pub fn total(&self) -> usize {
        self.todo + self.ongoing + self.successful + self.failed + self.skipped
    }
}

impl std::fmt::Display for Counts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "todo={} ongoing={} successful={} failed={} skipped={}",
            self.todo, self.ongoing, self.successful, self.failed, self.skipped
        )
    }
}

/// Runs the queued records, persisting every status change. Workers pull the next record from
/// a shared index, so the schedule never affects a record's content.
pub fn run_queue(
    ctx: &Arc<RunContext>,
    ws: &Workspace,
    queue: Vec<TestRecord>,
    mode: Mode,
    counts: Counts,
    on_progress: &(dyn Fn(&Counts) + Sync),
) -> Result<Counts> {
    let workers = match mode {
        Mode::Sequential => 1,
        Mode::Parallel(w) => w.max(1),
    };
    let next = AtomicUsize::new(0);
    let counts = Mutex::new(counts);
    let first_error: Mutex<Option<anyhow::Error>> = Mutex::new(None);
    let update = |from: Status, to: Status| {
        let mut c = counts.lock().expect("counts");
        c.remove(from);
        c.add(to);
        on_progress(&c);
    };
    let worker = || loop {
        if first_error.lock().expect("error slot").is_some() {
            return;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(record) = queue.get(i) else {
            return;
        };
        let mut record = record.clone();
        record.status = Status::Ongoing;
        record.started_at = Some(now());
        if let Err(e) = ws.save(&record) {
            *first_error.lock().expect("error slot") = Some(e);
            return;
        }
        update(Status::Todo, Status::Ongoing);
        let done = execute(ctx, record);
        if let Err(e) = ws.save(&done) {
            *first_error.lock().expect("error slot") = Some(e);
            return;
        }
        update(Status::Ongoing, done.status);
    };
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(worker);
        }
    });
    if let Some(e) = first_error.into_inner().expect("error slot") {
        return Err(e);
    }
    Ok(counts.into_inner().expect("counts"))
}

/// Prepares data, enumerates tests, recovers interrupted state and runs everything left.
/// Holds the workspace lock throughout.
pub fn run_experiment(
    config: &ExperimentConfig,
    ws: &Workspace,
    mode: Mode,
    on_progress: &(dyn Fn(&Counts) + Sync),
) -> Result<Counts> {
    ws.create()?;
    let _lock = ws.lock()?;
    if let Ok(previous) = ws.load_config() {
        if &previous != config {
            warn!("configuration differs from the one stored in {}", ws.dir.display());
        }
    }
    ws.save_config(config)?;
    let datasets = prepare_datasets(config, &ws.cache_dir())?;
    let mut ctx = RunContext::new(datasets, ws.cache(config.use_cache));
    ctx.record_runtime = config.record_runtime;
    ctx.time_limit = minutes(config.test_time_limit);
    let ctx = Arc::new(ctx);

    let enumerated = enumerate_tests(config, &ctx.infos(), &ctx.registry)?;
    let queue = reconcile(ws, &enumerated, config.restart_failed)?;
    let stored = ws.records()?;
    let ids: std::collections::BTreeSet<&str> = enumerated.iter().map(|r| r.id.as_str()).collect();
    let current: Vec<TestRecord> = stored.into_iter().filter(|r| ids.contains(r.id.as_str())).collect();
    let counts = Counts::of(&current);
    info!(
        "{} tests enumerated, {} to run ({mode:?})",
        enumerated.len(),
        queue.len()
    );
    on_progress(&counts);
    run_queue(&ctx, ws, queue, mode, counts, on_progress)
}
