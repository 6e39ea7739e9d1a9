//! Experiment configuration: the Listing-style YAML document, validated and with defaults.

use std::collections::BTreeSet;
use std::path::Path;

use evalbench_core::data::{DatasetSource, DatasetSpec};
use evalbench_core::kernels::stats::ALPHA;
use evalbench_core::model::{
    is_out_of_scope_measure, EmbedderKind, MeasureRegistry, TransformKind, DEFAULT_KAPPA_STEPS,
};
use log::warn;
use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid YAML: {0}")]
    Yaml(#[from] serde_yaml::Error),
    #[error("config must be a key-value mapping")]
    NotAMapping,
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("measure `{0}` is known but out of scope for this benchmark (it needs a deep or external model); remove it from `measures`")]
    OutOfScopeMeasure(String),
    #[error("unknown measure id `{0}`")]
    UnknownMeasure(String),
    #[error("unknown dataset `{0}`; add it to `catalog` or use one of the catalog names")]
    UnknownDataset(String),
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    /// Dataset names, resolved against `catalog`.
    pub datasets: Vec<String>,
    pub catalog: Vec<DatasetSpec>,
    /// Each entry is a chain of one or two transformations.
    pub transformations: Vec<Vec<TransformKind>>,
    pub embedders: Vec<EmbedderKind>,
    /// Registry ids in config order, deduplicated.
    pub measures: Vec<String>,
    pub seeds: Vec<u64>,
    pub kappa_steps: usize,
    pub alpha: f64,
    pub use_cache: bool,
    pub record_runtime: bool,
    pub restart_failed: bool,
    /// Per-test cap in minutes.
    pub test_time_limit: f64,
    pub workers: usize,
}

const KNOWN_KEYS: [&str; 17] = [
    "name",
    "datasets",
    "catalog",
    "transformations",
    "embedders",
    "measures",
    "seeds",
    "kappa_steps",
    "alpha",
    "use_cache",
    "record_runtime",
    "restart_failed",
    "test_time_limit",
    "workers",
    "data_feeds",
    "use_database",
    "rebuild_image",
];

pub const DEFAULT_TIME_LIMIT_MINUTES: f64 = 120.0;

impl ExperimentConfig {
    /// Parses and validates a config document. Measure ids are checked against `registry`.
    pub fn parse(text: &str, registry: &MeasureRegistry) -> Result<Self, ConfigError> {
        let doc: Value = serde_yaml::from_str(text)?;
        let map = doc.as_mapping().ok_or(ConfigError::NotAMapping)?;
        for key in map.keys() {
            let key = key.as_str().unwrap_or("<non-string key>");
            match key {
                "use_database" => warn!("`use_database` ignored: records are stored in the workspace directory"),
                "rebuild_image" => warn!("`rebuild_image` ignored: tests run in-process"),
                "compare_results_to" => warn!("`compare_results_to` ignored"),
                k if !KNOWN_KEYS.contains(&k) => warn!("unknown config key `{k}` ignored"),
                _ => {}
            }
        }

        let name = match map.get("name") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| invalid("name", "must be a string"))?
                .to_string(),
            None => return Err(ConfigError::Missing("name")),
        };
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(invalid("name", format!("`{name}` is not usable as a directory name")));
        }

        let catalog: Vec<DatasetSpec> = match map.get("catalog") {
            Some(v) => serde_yaml::from_value(v.clone())
                .map_err(|e| invalid("catalog", e.to_string()))?,
            None => vec![DatasetSpec::sine_default()],
        };
        let mut names = BTreeSet::new();
        for spec in &catalog {
            spec.validate()
                .map_err(|e| invalid("catalog", format!("{}: {e}", spec.name)))?;
            if !names.insert(spec.name.clone()) {
                return Err(invalid("catalog", format!("duplicate dataset `{}`", spec.name)));
            }
        }

        let datasets = match map.get("datasets") {
            None => return Err(ConfigError::Missing("datasets")),
            Some(Value::String(s)) if s == "ALL" => catalog.iter().map(|s| s.name.clone()).collect(),
            Some(v) => {
                let list = string_list(v, "datasets")?;
                for d in &list {
                    if !names.contains(d) {
                        return Err(ConfigError::UnknownDataset(d.clone()));
                    }
                }
                dedup(list)
            }
        };
        if datasets.is_empty() {
            return Err(invalid("datasets", "no datasets selected"));
        }

        let transformations = parse_transformations(map)?;
        let embedders = match map.get("embedders") {
            None => vec![EmbedderKind::Concat],
            Some(v) => {
                let mut out = Vec::new();
                for id in string_list(v, "embedders")? {
                    let kind = EmbedderKind::from_id(&id)
                        .map_err(|e| invalid("embedders", e.to_string()))?;
                    if !out.contains(&kind) {
                        out.push(kind);
                    }
                }
                out
            }
        };

        let mut measures = Vec::new();
        for id in string_list(map.get("measures").ok_or(ConfigError::Missing("measures"))?, "measures")? {
            if is_out_of_scope_measure(&id) {
                return Err(ConfigError::OutOfScopeMeasure(id));
            }
            let canonical = registry
                .get(&id)
                .map_err(|_| ConfigError::UnknownMeasure(id.clone()))?
                .id
                .clone();
            if !measures.contains(&canonical) {
                measures.push(canonical);
            }
        }
        if measures.is_empty() {
            return Err(invalid("measures", "no measures selected"));
        }
        let needs_embedder = measures
            .iter()
            .any(|m| registry.get(m).map(|d| d.needs_embedding()).unwrap_or(false));
        if needs_embedder && embedders.is_empty() {
            return Err(invalid("embedders", "embedding-dependent measures need an embedder"));
        }

        let seeds = match map.get("seeds") {
            None => return Err(ConfigError::Missing("seeds")),
            Some(Value::Sequence(seq)) => {
                let seeds = seq
                    .iter()
                    .map(|v| {
                        v.as_u64().ok_or_else(|| {
                            invalid("seeds", format!("`{v:?}` is not a non-negative integer"))
                        })
                    })
                    .collect::<Result<Vec<u64>, _>>()?;
                dedup(seeds)
            }
            Some(_) => return Err(invalid("seeds", "must be a list of integers")),
        };
        if seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }

        if let Some(v) = map.get("data_feeds") {
            let feeds = string_list(v, "data_feeds")?;
            if feeds.iter().any(|f| f != "feed_train") {
                warn!("only the `feed_train` data feed is supported; other feeds ignored");
            }
        }

        let kappa_steps = match map.get("kappa_steps") {
            None => DEFAULT_KAPPA_STEPS,
            Some(v) => v
                .as_u64()
                .filter(|&k| k >= 2)
                .ok_or_else(|| invalid("kappa_steps", "must be an integer >= 2"))? as usize,
        };
        let alpha = match map.get("alpha") {
            None => ALPHA,
            Some(v) => v
                .as_f64()
                .filter(|a| *a > 0.0 && *a < 1.0)
                .ok_or_else(|| invalid("alpha", "must be in (0, 1)"))?,
        };
        let test_time_limit = match map.get("test_time_limit") {
            None => DEFAULT_TIME_LIMIT_MINUTES,
            Some(v) => v
                .as_f64()
                .filter(|t| *t > 0.0)
                .ok_or_else(|| invalid("test_time_limit", "must be a positive number of minutes"))?,
        };

        Ok(Self {
            name,
            datasets,
            catalog,
            transformations,
            embedders,
            measures,
            seeds,
            kappa_steps,
            alpha,
            use_cache: flag(map, "use_cache", true)?,
            record_runtime: flag(map, "record_runtime", true)?,
            restart_failed: flag(map, "restart_failed", false)?,
            test_time_limit,
            workers: parse_workers(map.get("workers"))?,
        })
    }

    pub fn dataset_spec(&self, name: &str) -> Option<&DatasetSpec> {
        self.catalog.iter().find(|s| s.name == name)
    }

    /// Makes relative dataset paths absolute against `base` (the config file's directory), so
    /// the stored config stays usable from any working directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        for spec in &mut self.catalog {
            if let DatasetSource::LocalFile { path } = &mut spec.source {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    /// Replaces the seed list (desk-scale runs).
    pub fn override_seeds(&mut self, seeds: Vec<u64>) -> Result<(), ConfigError> {
        if seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        self.seeds = dedup(seeds);
        Ok(())
    }

    pub fn override_kappa_steps(&mut self, steps: usize) -> Result<(), ConfigError> {
        if steps < 2 {
            return Err(invalid("kappa_steps", "must be an integer >= 2"));
        }
        self.kappa_steps = steps;
        Ok(())
    }
}


fn string_list(v: &Value, key: &'static str) -> Result<Vec<String>, ConfigError> {
    match v {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Sequence(seq) => seq
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| invalid(key, format!("`{x:?}` is not a string")))
            })
            .collect(),
        _ => Err(invalid(key, "must be a string or a list of strings")),
    }
}

fn dedup<T: PartialEq>(list: Vec<T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(list.len());
    for x in list {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn flag(map: &Mapping, key: &'static str, default: bool) -> Result<bool, ConfigError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.as_bool().ok_or_else(|| invalid(key, "must be true or false")),
    }
}

fn parse_transformations(map: &Mapping) -> Result<Vec<Vec<TransformKind>>, ConfigError> {
    const KEY: &str = "transformations";
    let v = map.get(KEY).ok_or(ConfigError::Missing(KEY))?;
    let entries = match v {
        Value::Sequence(seq) => seq.clone(),
        Value::String(_) => vec![v.clone()],
        _ => return Err(invalid(KEY, "must be a list of ids or [id, id] chains")),
    };
    let parse = |id: &str| TransformKind::from_id(id).map_err(|e| invalid(KEY, e.to_string()));
    let mut out: Vec<Vec<TransformKind>> = Vec::new();
    for entry in entries {
        let chain = match &entry {
            Value::String(id) => vec![parse(id)?],
            Value::Sequence(ids) => {
                if ids.is_empty() || ids.len() > 2 {
                    return Err(invalid(
                        KEY,
                        format!("a chain has one or two transformations, got {}", ids.len()),
                    ));
                }
                ids.iter()
                    .map(|x| match x.as_str() {
                        Some(id) => parse(id),
                        None => Err(invalid(KEY, "chains may only contain transformation ids")),
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            other => return Err(invalid(KEY, format!("malformed entry `{other:?}`"))),
        };
        if !out.contains(&chain) {
            out.push(chain);
        }
    }
    if out.is_empty() {
        return Err(invalid(KEY, "no transformations selected"));
    }
    Ok(out)
}

/// An integer, or the container layout `{cpu: [[cores, mem], ...], gpu: [...]}` whose listed
/// worker instances become in-process workers.
fn parse_workers(v: Option<&Value>) -> Result<usize, ConfigError> {
    const KEY: &str = "workers";
    match v {
        None => Ok(1),
        Some(Value::Number(n)) => n
            .as_u64()
            .filter(|&w| w >= 1)
            .map(|w| w as usize)
            .ok_or_else(|| invalid(KEY, "must be a positive integer")),
        Some(Value::Mapping(m)) => {
            let mut count = 0usize;
            for (pool, list) in m {
                let Some(seq) = list.as_sequence() else {
                    return Err(invalid(KEY, format!("pool `{pool:?}` must be a list")));
                };
                count += seq.len();
            }
            warn!("container worker layout mapped to {count} in-process workers; memory caps are not enforced");
            Ok(count.max(1))
        }
        Some(_) => Err(invalid(KEY, "must be an integer or a worker layout")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, &MeasureRegistry::builtin())
    }

    const MINIMAL: &str = "name: mini\ndatasets: ALL\ntransformations: [gn_moderate]\nmeasures: [jsd]\nseeds: [1]\n";

    #[test]
    fn defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.datasets, ["sine"]);
        assert_eq!(c.kappa_steps, 11);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.test_time_limit, 120.0);
        assert!(c.use_cache && c.record_runtime && !c.restart_failed);
        assert_eq!(c.workers, 1);
        assert_eq!(c.embedders, [EmbedderKind::Concat]);
    }

    #[test]
    fn chains() {
        let text = MINIMAL.replace("[gn_moderate]", "[[shuffle, gn_moderate], corrupt_labels]");
        let c = parse(&text).unwrap();
        assert_eq!(
            c.transformations,
            vec![
                vec![TransformKind::Shuffle, TransformKind::GaussianNoise],
                vec![TransformKind::LabelCorruption]
            ]
        );
        let deep = MINIMAL.replace("[gn_moderate]", "[[shuffle, gn_moderate, shuffle]]");
        assert!(matches!(parse(&deep), Err(ConfigError::Invalid { key: "transformations", .. })));
        let nested = MINIMAL.replace("[gn_moderate]", "[[shuffle, [gn_moderate]]]");
        assert!(parse(&nested).is_err());
    }

    #[test]
    fn measure_errors_name_the_id() {
        let oos = MINIMAL.replace("[jsd]", "[jsd, domias]");
        let e = parse(&oos).unwrap_err().to_string();
        assert!(e.contains("domias") && e.contains("out of scope"), "{e}");
        let unknown = MINIMAL.replace("[jsd]", "[not_a_measure]");
        let e = parse(&unknown).unwrap_err().to_string();
        assert!(e.contains("not_a_measure") && !e.contains("out of scope"), "{e}");
    }

    #[test]
    fn empty_seeds_rejected() {
        assert!(parse(&MINIMAL.replace("[1]", "[]")).is_err());
        assert!(parse(&MINIMAL.replace("seeds: [1]\n", "")).is_err());
    }

    #[test]
    fn time_limit_and_workers() {
        let text = format!("{MINIMAL}test_time_limit: 120\nworkers: {{cpu: [[4, 100], [4, 100]], gpu: [[4, 100]]}}\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.test_time_limit, 120.0);
        assert_eq!(c.workers, 3);
    }

    #[test]
    fn ts2vec_points_at_the_substitute() {
        let text = format!("{MINIMAL}embedders: [ts2vec]\n");
        let e = parse(&text).unwrap_err().to_string();
        assert!(e.contains("statfeat"), "{e}");
    }

    #[test]
    fn unknown_dataset() {
        let text = MINIMAL.replace("datasets: ALL", "datasets: [ecg]");
        assert!(matches!(parse(&text), Err(ConfigError::UnknownDataset(d)) if d == "ecg"));
    }
}
