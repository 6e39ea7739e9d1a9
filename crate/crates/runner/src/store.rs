//! Filesystem workspace: one JSON record per test, the artifact cache, reports, and the lock
//! that keeps two live runs out of the same experiment.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use evalbench_core::evaluation::TestOutcome;
use evalbench_core::model::{Score, Status, TestSpec};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::cache::{publish, Cache};
use crate::config::ExperimentConfig;

/// Persisted state of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub id: String,
    pub spec: TestSpec,
    pub status: Status,
    pub scores: Vec<Score>,
    /// Measure seconds per κ step.
    pub runtimes: Vec<f64>,
    /// Whether the step's score came from the cache (the runtime is then the original one).
    #[serde(default)]
    pub runtime_cached: Vec<bool>,
    #[serde(default)]
    pub embed_runtimes: Vec<f64>,
    #[serde(default)]
    pub embed_cached: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    /// Why an inapplicable test was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    #[serde(default)]
    pub started_at: Option<String>,
    #[serde(default)]
    pub finished_at: Option<String>,
}

impl TestRecord {
    pub fn todo(spec: TestSpec) -> Self {
        Self {
            id: spec.id(),
            spec,
            status: Status::Todo,
            scores: Vec::new(),
            runtimes: Vec::new(),
            runtime_cached: Vec::new(),
            embed_runtimes: Vec::new(),
            embed_cached: Vec::new(),
            failure_reason: None,
            skip_reason: None,
            started_at: None,
            finished_at: None,
        }
    }

    pub fn skipped(spec: TestSpec, reason: String) -> Self {
        Self {
            status: Status::Skipped,
            skip_reason: Some(reason),
            ..Self::todo(spec)
        }
    }

    pub fn outcome(&self) -> TestOutcome {
        TestOutcome {
            test_id: self.id.clone(),
            spec: self.spec.clone(),
            status: self.status,
            scores: self.scores.clone(),
            runtimes: self.runtimes.clone(),
            runtime_cached: self.runtime_cached.clone(),
            embed_runtimes: self.embed_runtimes.clone(),
            embed_cached: self.embed_cached.clone(),
            failure_reason: self.failure_reason.clone(),
        }
    }

    /// The parts of a record that must not depend on scheduling: spec, status, scores, reasons.
    pub fn result_view(&self) -> (String, Status, &[Score], Option<&str>, Option<&str>) {
        (
            self.id.clone(),
            self.status,
            &self.scores,
            self.failure_reason.as_deref(),
            self.skip_reason.as_deref(),
        )
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Directory layout of one experiment: `<root>/<name>/{tests,cache,reports}`.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
}

const CONFIG_FILE: &str = "config.json";

impl Workspace {
    pub fn new(root: &Path, experiment: &str) -> Self {
        Self {
            dir: root.join(experiment),
        }
    }

    /// An experiment given by name under `root`, or directly by its directory.
    pub fn locate(root: &Path, experiment: &str) -> Self {
        let direct = Path::new(experiment);
        if direct.join("tests").is_dir() {
            return Self {
                dir: direct.to_path_buf(),
            };
        }
        Self::new(root, experiment)
    }

    pub fn tests_dir(&self) -> PathBuf {
        self.dir.join("tests")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.dir.join("cache")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.dir.join("reports")
    }

    pub fn cache(&self, enabled: bool) -> Cache {
        Cache::new(self.cache_dir(), enabled)
    }

    pub fn record_path(&self, id: &str) -> PathBuf {
        self.tests_dir().join(format!("{id}.json"))
    }

    pub fn create(&self) -> Result<()> {
        for d in [self.tests_dir(), self.cache_dir(), self.reports_dir()] {
            fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(())
    }

    pub fn save_config(&self, config: &ExperimentConfig) -> Result<()> {
        publish(&self.dir.join(CONFIG_FILE), &serde_json::to_vec_pretty(config)?)?;
        Ok(())
    }

    pub fn load_config(&self) -> Result<ExperimentConfig> {
        let path = self.dir.join(CONFIG_FILE);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Persists a record atomically.
    pub fn save(&self, record: &TestRecord) -> Result<()> {
        let path = self.record_path(&record.id);
        publish(&path, &serde_json::to_vec_pretty(record)?)
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(&self, id: &str) -> Result<TestRecord> {
        let path = self.record_path(id);
        let bytes = fs::read(&path).with_context(|| format!("no record for test `{id}`"))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    /// All records, sorted by id. Unreadable files are reported and skipped.
    pub fn records(&self) -> Result<Vec<TestRecord>> {
        let dir = self.tests_dir();
        let mut out = Vec::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            match fs::read(&path).map_err(anyhow::Error::from).and_then(|b| {
                serde_json::from_slice::<TestRecord>(&b).map_err(anyhow::Error::from)
            }) {
                Ok(r) => out.push(r),
                Err(e) => warn!("skipping unreadable record {}: {e}", path.display()),
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    pub fn lock(&self) -> Result<WorkspaceLock> {
        WorkspaceLock::acquire(&self.dir.join(".lock"))
    }
}

/// Exclusive ownership of an experiment directory by one live process.
#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

fn process_alive(pid: u32) -> bool {
    if pid == std::process::id() {
        return true;
    }
    if cfg!(target_os = "linux") {
        Path::new(&format!("/proc/{pid}")).exists()
    } else {
        // Without a portable liveness probe, assume the owner is alive.
        true
    }
}

impl WorkspaceLock {
    pub fn acquire(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(path) {
                Ok(mut f) => {
                    write!(f, "{}", std::process::id())?;
                    return Ok(Self {
                        path: path.to_path_buf(),
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let owner = fs::read_to_string(path)
                        .ok()
                        .and_then(|s| s.trim().parse::<u32>().ok());
                    match owner {
                        Some(pid) if process_alive(pid) => {
                            bail!("workspace {} is locked by live process {pid}", path.display())
                        }
                        _ => {
                            warn!("removing stale lock {}", path.display());
                            fs::remove_file(path)?;
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        bail!("could not acquire lock {}", path.display())
    }
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Brings the stored records in line with the enumerated specs and returns the ids to run.
/// Interrupted (`ongoing`) tests go back to `todo`; failed ones too when `restart_failed`.
pub fn reconcile(
    ws: &Workspace,
    enumerated: &[TestRecord],
    restart_failed: bool,
) -> Result<Vec<TestRecord>> {
    let existing: std::collections::BTreeMap<String, TestRecord> = ws
        .records()?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let mut todo = Vec::new();
    let (mut reset, mut restarted) = (0usize, 0usize);
    for fresh in enumerated {
        let record = match existing.get(&fresh.id) {
            None => {
                ws.save(fresh)?;
                fresh.clone()
            }
            Some(r) if r.status == Status::Ongoing => {
                reset += 1;
                let r = TestRecord::todo(r.spec.clone());
                ws.save(&r)?;
                r
            }
            Some(r) if r.status == Status::Failed && restart_failed => {
                restarted += 1;
                let r = TestRecord::todo(r.spec.clone());
                ws.save(&r)?;
                r
            }
            Some(r) => r.clone(),
        };
        if record.status == Status::Todo {
            todo.push(record);
        }
    }
    if reset > 0 {
        info!("recovered {reset} interrupted tests");
    }
    if restarted > 0 {
        info!("re-enqueued {restarted} failed tests");
    }
    Ok(todo)
}
