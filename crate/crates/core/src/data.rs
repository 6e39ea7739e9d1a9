//! Dataset ingestion, preprocessing, splitting, and the synthetic Sine generator.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use log::warn;
use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Dataset, Role, SplitNeeds};
use crate::rng;

/// One class of the Sine generator. Shift is a fraction of the period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineClass {
    pub amplitude: f64,
    pub period: f64,
    pub shift: f64,
    pub channel_offset: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineParams {
    pub classes: Vec<SineClass>,
    /// Relative per-instance jitter on amplitude and shift.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    0.05
}

impl Default for SineParams {
    fn default() -> Self {
        let amplitudes = [0.5, 0.8, 1.0, 1.2, 1.5];
        let periods = [10.0, 16.0, 25.0, 33.0, 50.0];
        let shifts = [0.0, 0.2, 0.4, 0.6, 0.8];
        let offsets = [0.0, PI / 8.0, PI / 4.0, PI / 2.0, PI];
        let proportions = [0.35, 0.25, 0.2, 0.12, 0.08];
        let classes = (0..5)
            .map(|i| SineClass {
                amplitude: amplitudes[i],
                period: periods[i],
                shift: shifts[i],
                channel_offset: offsets[i],
                proportion: proportions[i],
            })
            .collect();
        Self {
            classes,
            jitter: default_jitter(),
        }
    }
}

/// Splits `n` into integer counts proportional to `weights` (largest remainder).
pub fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// Sum of two sine waves per channel; the second has half the amplitude and half the period.
fn sine_value(amplitude: f64, period: f64, shift: f64, phase: f64, t: f64) -> f64 {
    let x = t - shift;
    amplitude * (2.0 * PI * x / period + phase).sin()
        + 0.5 * amplitude * (4.0 * PI * x / period + phase).sin()
}

pub fn generate_sine(
    params: &SineParams,
    n: usize,
    l: usize,
    d: usize,
    seed: u64,
) -> Result<Dataset> {
    if params.classes.is_empty() {
        return Err(invalid("sine class table is empty"));
    }
    let total: f64 = params.classes.iter().map(|c| c.proportion).sum();
    if (total - 1.0).abs() > 1e-6 || params.classes.iter().any(|c| c.proportion < 0.0) {
        return Err(invalid("sine class proportions must be non-negative and sum to 1"));
    }
    if n < params.classes.len() {
        return Err(invalid(format!(
            "n = {n} is smaller than the number of classes ({})",
            params.classes.len()
        )));
    }
    if params.classes.iter().any(|c| c.period <= 0.0) {
        return Err(invalid("sine periods must be positive"));
    }
    let weights: Vec<f64> = params.classes.iter().map(|c| c.proportion).collect();
    let counts = apportion(n, &weights);
    let mut labels: Vec<u32> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c as u32, k))
        .collect();
    let mut rng = rng::stream(seed, "sine", 0);
    labels.shuffle(&mut rng);

    let j = params.jitter;
    let mut values = Array3::<f64>::zeros((n, l, d));
    for (i, &y) in labels.iter().enumerate() {
        let class = &params.classes[y as usize];
        let (amp_jitter, shift_jitter) = if j > 0.0 {
            (rng.random_range(-j..=j), rng.random_range(-j..=j))
        } else {
            (0.0, 0.0)
        };
        let amplitude = class.amplitude * (1.0 + amp_jitter);
        let shift = (class.shift + shift_jitter) * class.period;
        for t in 0..l {
            for c in 0..d {
                values[[i, t, c]] = sine_value(
                    amplitude,
                    class.period,
                    shift,
                    c as f64 * class.channel_offset,
                    t as f64,
                );
            }
        }
    }
    Dataset::new(values, Some(labels), "sine", Role::Train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    GeneratedSine {
        #[serde(default)]
        params: Option<SineParams>,
        n: usize,
        l: usize,
        d: usize,
        #[serde(default)]
        seed: u64,
    },
    LocalFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DatasetSource,
    #[serde(default)]
    pub window_length: Option<usize>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_true")]
    pub has_labels: bool,
}

fn default_stride() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.window_length, Some(w) if w < 2) {
            return Err(invalid("window_length must be >= 2"));
        }
        if self.stride < 1 {
            return Err(invalid("stride must be >= 1"));
        }
        Ok(())
    }

    /// The default catalog entry: 10000 instances, length 100, 2 channels, 5 classes.
    pub fn sine_default() -> Self {
        Self {
            name: "sine".into(),
            source: DatasetSource::GeneratedSine {
                params: None,
                n: 10_000,
                l: 100,
                d: 2,
                seed: 0,
            },
            window_length: None,
            stride: 1,
            has_labels: true,
        }
    }
}

/// One raw, possibly gappy series: `rows[t][c]`, NaN marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub id: String,
    pub rows: Vec<Vec<f64>>,
    pub label: Option<String>,
}

/// Parsed but unprocessed input table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub series: Vec<RawSeries>,
    pub channels: usize,
}

impl RawTable {
    /// Parses the long format `instance_id, t, ch_0..ch_{d-1}[, label]`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 3 || cols[0] != "instance_id" || cols[1] != "t" {
            return Err(Error::Parse(
                "expected header `instance_id, t, ch_0, ...[, label]`".into(),
            ));
        }
        let has_label = cols.last() == Some(&"label");
        let channels = cols.len() - 2 - usize::from(has_label);
        if channels == 0 {
            return Err(Error::Parse("no channel columns".into()));
        }
        for (c, name) in cols[2..2 + channels].iter().enumerate() {
            if *name != format!("ch_{c}") {
                return Err(Error::Parse(format!("unexpected column `{name}`")));
            }
        }

        let mut order: Vec<String> = Vec::new();
        let mut rows: BTreeMap<String, Vec<(i64, Vec<f64>)>> = BTreeMap::new();
        let mut labels: BTreeMap<String, String> = BTreeMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let at = |msg: &str| Error::Parse(format!("row {}: {msg}", line + 2));
            let id = record.get(0).ok_or_else(|| at("missing instance_id"))?.to_string();
            let t: i64 = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| at("invalid t"))?;
            let mut vals = Vec::with_capacity(channels);
            for c in 0..channels {
                let cell = record.get(2 + c).unwrap_or("");
                let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| at(&format!("invalid value `{cell}`")))?
                };
                vals.push(v);
            }
            if has_label {
                let label = record.get(2 + channels).unwrap_or("").to_string();
                match labels.get(&id) {
                    Some(prev) if *prev != label => {
                        return Err(at(&format!("instance `{id}` has conflicting labels")))
                    }
                    _ => {
                        labels.insert(id.clone(), label);
                    }
                }
            }
            if !rows.contains_key(&id) {
                order.push(id.clone());
            }
            rows.entry(id).or_default().push((t, vals));
        }
        let series = order
            .into_iter()
            .map(|id| {
                let mut r = rows.remove(&id).unwrap_or_default();
                r.sort_by_key(|(t, _)| *t);
                RawSeries {
                    label: labels.remove(&id),
                    rows: r.into_iter().map(|(_, v)| v).collect(),
                    id,
                }
            })
            .collect();
        Ok(Self { series, channels })
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let series = (0..ds.n())
            .map(|i| {
                let inst = ds.instance(i);
                RawSeries {
                    id: i.to_string(),
                    rows: inst.rows().into_iter().map(|r| r.to_vec()).collect(),
                    label: ds.labels().map(|ls| ls[i].to_string()),
                }
            })
            .collect();
        Self {
            series,
            channels: ds.channels(),
        }
    }
}

pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["instance_id".to_string(), "t".to_string()];
    header.extend((0..ds.channels()).map(|c| format!("ch_{c}")));
    if ds.has_labels() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..ds.n() {
        for t in 0..ds.length() {
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend((0..ds.channels()).map(|c| ds.values()[[i, t, c]].to_string()));
            if let Some(labels) = ds.labels() {
                rec.push(labels[i].to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Summary statistics stored alongside a preprocessed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub class_histogram: BTreeMap<u32, usize>,
}

impl DatasetStats {
    pub fn of(ds: &Dataset) -> Self {
        let d = ds.channels();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for c in 0..d {
            let col: Vec<f64> = ds
                .values()
                .index_axis(ndarray::Axis(2), c)
                .iter()
                .copied()
                .collect();
            mean[c] = crate::kernels::stats::mean(&col);
            std[c] = crate::kernels::stats::std(&col);
            for &v in &col {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Self {
            mean,
            std,
            min,
            max,
            class_histogram: ds.class_histogram(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub dataset: Dataset,
    pub stats: DatasetStats,
}

/// Linear interpolation of interior gaps; leading/trailing gaps take the nearest valid value.
pub fn interpolate(values: &mut [f64]) -> Result<()> {
    let valid: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    let (Some(&first), Some(&last)) = (valid.first(), valid.last()) else {
        return Err(invalid("channel has no valid values"));
    };
    let head = values[first];
    values[..first].fill(head);
    let tail = values[last];
    values[last + 1..].fill(tail);
    for w in valid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (va, vb) = (values[a], values[b]);
        for i in a + 1..b {
            let frac = (i - a) as f64 / (b - a) as f64;
            values[i] = va + frac * (vb - va);
        }
    }
    Ok(())
}

/// Nearest-rank quantile bounds `(q_lo, q_hi)` of an unsorted sample.
pub fn clip_bounds(sample: &[f64], q_lo: f64, q_hi: f64) -> (f64, f64) {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let lo = (q_lo * last).floor() as usize;
    let hi = (q_hi * last).ceil() as usize;
    (sorted[lo], sorted[hi.min(sorted.len() - 1)])
}

pub const CLIP_QUANTILES: (f64, f64) = (0.001, 0.999);

pub fn preprocess(raw: &RawTable, spec: &DatasetSpec) -> Result<PreparedDataset> {
    spec.validate()?;
    if raw.series.is_empty() {
        return Err(invalid(format!("dataset `{}` has no series", spec.name)));
    }
    let d = raw.channels;
    // Per-series channel-major buffers after interpolation.
    let mut filled: Vec<Vec<Vec<f64>>> = Vec::with_capacity(raw.series.len());
    for s in &raw.series {
        if s.rows.is_empty() {
            return Err(invalid(format!("series `{}` is empty", s.id)));
        }
        let mut chans = Vec::with_capacity(d);
        for c in 0..d {
            let mut col: Vec<f64> = s.rows.iter().map(|r| r[c]).collect();
            interpolate(&mut col).map_err(|_| {
                invalid(format!("series `{}` channel {c} is entirely missing", s.id))
            })?;
            chans.push(col);
        }
        filled.push(chans);
    }

    let mut label_ids: BTreeMap<&str, u32> = BTreeMap::new();
    if spec.has_labels {
        for s in &raw.series {
            let label = s
                .label
                .as_deref()
                .ok_or_else(|| invalid(format!("series `{}` has no label", s.id)))?;
            label_ids.insert(label, 0);
        }
        // Numeric labels keep numeric order; otherwise lexical.
        let mut keys: Vec<&str> = label_ids.keys().copied().collect();
        if keys.iter().all(|k| k.parse::<i64>().is_ok()) {
            keys.sort_by_key(|k| k.parse::<i64>().unwrap_or(0));
        }
        for (i, k) in keys.into_iter().enumerate() {
            label_ids.insert(k, i as u32);
        }
    }
    let label_of = |s: &RawSeries| -> Option<u32> {
        spec.has_labels
            .then(|| label_ids[s.label.as_deref().unwrap_or_default()])
    };

    // Equalize lengths: windows or truncation to the shortest series.
    let mut instances: Vec<(&Vec<Vec<f64>>, usize, usize, Option<u32>)> = Vec::new();
    let l = match spec.window_length {
        Some(w) => {
            for (s, chans) in raw.series.iter().zip(&filled) {
                let len = chans[0].len();
                if len < w {
                    return Err(invalid(format!(
                        "series `{}` has {len} steps, fewer than the window length {w}",
                        s.id
                    )));
                }
                let mut start = 0;
                while start + w <= len {
                    instances.push((chans, start, w, label_of(s)));
                    start += spec.stride;
                }
            }
            w
        }
        None => {
            let l = filled.iter().map(|c| c[0].len()).min().unwrap_or(0);
            for (s, chans) in raw.series.iter().zip(&filled) {
                instances.push((chans, 0, l, label_of(s)));
            }
            l
        }
    };
    if instances.len() < 4 {
        return Err(invalid(format!(
            "dataset `{}` has {} instances after preprocessing; at least 4 are needed",
            spec.name,
            instances.len()
        )));
    }
    if l < 2 {
        return Err(invalid(format!("dataset `{}` has series shorter than 2", spec.name)));
    }

    let n = instances.len();
    let mut values = Array3::<f64>::zeros((n, l, d));
    for (i, (chans, start, len, _)) in instances.iter().enumerate() {
        for c in 0..d {
            for t in 0..*len {
                values[[i, t, c]] = chans[c][start + t];
            }
        }
    }
    for c in 0..d {
        let mut chan = values.index_axis_mut(ndarray::Axis(2), c);
        let sample: Vec<f64> = chan.iter().copied().collect();
        let (lo, hi) = clip_bounds(&sample, CLIP_QUANTILES.0, CLIP_QUANTILES.1);
        chan.mapv_inplace(|v| v.clamp(lo, hi));
    }
    let labels = spec
        .has_labels
        .then(|| instances.iter().map(|(.., y)| y.unwrap_or(0)).collect());
    let dataset = Dataset::new(values, labels, spec.name.clone(), Role::Train)?;
    let stats = DatasetStats::of(&dataset);
    Ok(PreparedDataset { dataset, stats })
}

/// Loads or generates the raw data for `spec` and preprocesses it.
pub fn load(spec: &DatasetSpec, base_dir: &Path) -> Result<PreparedDataset> {
    match &spec.source {
        DatasetSource::GeneratedSine {
            params,
            n,
            l,
            d,
            seed,
        } => {
            let params = params.clone().unwrap_or_default();
            let mut ds = generate_sine(&params, *n, *l, *d, *seed)?;
            ds.name = spec.name.clone();
            let raw = RawTable::from_dataset(&ds);
            preprocess(&raw, spec)
        }
        DatasetSource::LocalFile { path } => {
            let path = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            let raw = RawTable::from_csv_path(&path)?;
            preprocess(&raw, spec)
        }
    }
}

/// The real-data parts a test works with.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub substitute: Option<Dataset>,
    pub held_out: Option<Dataset>,
}

/// Index partition into `parts` near-equal groups, stratified by label when possible.
pub fn split_indices(
    n: usize,
    labels: Option<&[u32]>,
    parts: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if parts == 0 || n < 2 * parts {
        return Err(invalid(format!(
            "{n} instances cannot be split into {parts} parts of at least 2"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, "split", parts as u64));
    let order: Vec<usize> = match labels {
        Some(labels) => {
            let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for &i in &perm {
                by_class.entry(labels[i]).or_default().push(i);
            }
            if by_class.values().any(|v| v.len() < parts) {
                warn!("a class has fewer than {parts} instances; splitting without stratification");
                perm
            } else {
                by_class.into_values().flatten().collect()
            }
        }
        None => perm,
    };
    let mut out = vec![Vec::with_capacity(n / parts + 1); parts];
    for (pos, i) in order.into_iter().enumerate() {
        out[pos % parts].push(i);
    }
    for part in &mut out {
        part.sort_unstable();
    }
    Ok(out)
}

pub fn split(ds: &Dataset, needs: SplitNeeds, seed: u64) -> Result<Splits> {
    let parts = needs.parts();
    let idx = split_indices(ds.n(), ds.labels(), parts, seed)?;
    // Parts are filled round-robin, so later parts are never larger than earlier ones. With a
    // substitute set, D_train takes the last part so that substitution at κ = 1 always finds
    // enough instances in D_rs.
    let train_part = if needs.substitute { parts - 1 } else { 0 };
    let train = ds.select(&idx[train_part], Role::Train);
    let (substitute, held_out) = match (needs.substitute, needs.held_out) {
        (true, true) => (
            Some(ds.select(&idx[0], Role::Substitute)),
            Some(ds.select(&idx[1], Role::HeldOut)),
        ),
        (true, false) => (Some(ds.select(&idx[0], Role::Substitute)), None),
        (false, true) => (None, Some(ds.select(&idx[1], Role::HeldOut))),
        // Two-way by default; the second half is unused but kept out of D_train.
        (false, false) => (None, None),
    };
    Ok(Splits {
        train,
        substitute,
        held_out,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorSidecar {
    name: String,
    shape: (usize, usize, usize),
    labels: Option<Vec<u32>>,
    stats: DatasetStats,
    content_hash: String,
}

/// Persists a prepared dataset as `<stem>.bin` (little-endian f64) plus `<stem>.json`.
pub fn save_prepared(prepared: &PreparedDataset, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ds = &prepared.dataset;
    let mut bytes = Vec::with_capacity(ds.values().len() * 8);
    for v in ds.values().iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let sidecar = TensorSidecar {
        name: ds.name.clone(),
        shape: ds.shape(),
        labels: ds.labels().map(|l| l.to_vec()),
        stats: prepared.stats.clone(),
        content_hash: ds.content_hash(),
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_vec_pretty(&sidecar)?,
    )?;
    Ok(())
}

/// Inverse of [`save_prepared`]; rejects files whose content hash does not match.
pub fn load_prepared(dir: &Path, stem: &str) -> Result<PreparedDataset> {
    let sidecar: TensorSidecar =
        serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    let (n, l, d) = sidecar.shape;
    if bytes.len() != n * l * d * 8 {
        return Err(Error::Parse("tensor file has the wrong size".into()));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let values = Array3::from_shape_vec((n, l, d), flat)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let dataset = Dataset::new(values, sidecar.labels, sidecar.name, Role::Train)?;
    if dataset.content_hash() != sidecar.content_hash {
        return Err(Error::Parse("tensor content hash mismatch".into()));
    }
    Ok(PreparedDataset {
        dataset,
        stats: sidecar.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: &str) -> DatasetSpec {
        DatasetSpec {
            name: name.into(),
            source: DatasetSource::LocalFile { path: "x.csv".into() },
            window_length: None,
            stride: 1,
            has_labels: false,
        }
    }

    fn table(lengths: &[usize]) -> RawTable {
        RawTable {
            series: lengths
                .iter()
                .enumerate()
                .map(|(i, &len)| RawSeries {
                    id: i.to_string(),
                    rows: (0..len).map(|t| vec![(i * 100 + t) as f64]).collect(),
                    label: None,
                })
                .collect(),
            channels: 1,
        }
    }

    #[test]
    fn single_gap_is_interpolated() {
        let mut v = vec![1.0, f64::NAN, 3.0, 5.0];
        interpolate(&mut v).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 5.0]);
        let mut edges = vec![f64::NAN, 2.0, f64::NAN];
        interpolate(&mut edges).unwrap();
        assert_eq!(edges, vec![2.0, 2.0, 2.0]);
        assert!(interpolate(&mut [f64::NAN, f64::NAN]).is_err());
    }

    #[test]
    fn lengths_truncate_to_minimum() {
        let raw = table(&[10, 12, 11, 10]);
        let out = preprocess(&raw, &spec("t")).unwrap().dataset;
        assert_eq!(out.length(), 10);
        // Reference truncator: keep the first 10 rows of each series.
        for (i, s) in raw.series.iter().enumerate() {
            let reference: Vec<f64> = s.rows.iter().take(10).map(|r| r[0]).collect();
            assert_eq!(out.channel(i, 0), reference);
        }
    }

    #[test]
    fn windowing_counts() {
        let raw = table(&[150]);
        let mut s = spec("w");
        s.window_length = Some(144);
        let out = preprocess(&raw, &s).unwrap().dataset;
        assert_eq!(out.n(), 7);
        assert_eq!(out.length(), 144);
        s.window_length = Some(151);
        assert!(preprocess(&raw, &s).is_err());
    }

    #[test]
    fn too_few_instances_fail() {
        assert!(preprocess(&table(&[5, 5, 5]), &spec("few")).is_err());
    }

    #[test]
    fn preprocessing_is_idempotent_with_outliers() {
        // 2000 values: nearest-rank bounds sit on the second smallest / largest value.
        let mut raw = table(&[20; 100]);
        raw.series[3].rows[4][0] = 1e9;
        raw.series[7].rows[2][0] = -1e9;
        let once = preprocess(&raw, &spec("o")).unwrap().dataset;
        assert!(once.values().iter().all(|v| v.abs() < 1e4));
        let twice = preprocess(&RawTable::from_dataset(&once), &spec("o"))
            .unwrap()
            .dataset;
        assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_sine(&SineParams::default(), 20, 12, 2, 3).unwrap();
        let dir = tempdir();
        let path = dir.join("sine.csv");
        write_csv(&ds, &path).unwrap();
        let raw = RawTable::from_csv_path(&path).unwrap();
        let mut s = spec("sine");
        s.has_labels = true;
        let back = preprocess(&raw, &s).unwrap().dataset;
        assert_eq!(back.shape(), ds.shape());
        assert_eq!(back.labels(), ds.labels());
        assert!(fs::remove_dir_all(dir).is_ok());
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "id,t,ch_0\n0,0,1.0\n";
        assert!(RawTable::from_csv_reader(text.as_bytes()).is_err());
        let text = "instance_id,t,ch_0\n0,0,abc\n";
        assert!(RawTable::from_csv_reader(text.as_bytes()).is_err());
    }

    fn tempdir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "evalbench-data-{}-{}",
            std::process::id(),
            rand::random::<u64>()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn prepared_round_trip() {
        let ds = generate_sine(&SineParams::default(), 30, 16, 2, 1).unwrap();
        let prepared = PreparedDataset {
            stats: DatasetStats::of(&ds),
            dataset: ds,
        };
        let dir = tempdir();
        save_prepared(&prepared, &dir, "sine").unwrap();
        let back = load_prepared(&dir, "sine").unwrap();
        assert_eq!(back.dataset.values(), prepared.dataset.values());
        assert_eq!(back.stats, prepared.stats);
        fs::write(dir.join("sine.bin"), [0u8; 16]).unwrap();
        assert!(load_prepared(&dir, "sine").is_err());
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn zero_offset_channels_match() {
        let params = SineParams {
            classes: vec![SineClass {
                amplitude: 1.0,
                period: 12.0,
                shift: 0.1,
                channel_offset: 0.0,
                proportion: 1.0,
            }],
            jitter: 0.0,
        };
        let ds = generate_sine(&params, 4, 30, 2, 9).unwrap();
        for i in 0..4 {
            assert_eq!(ds.channel(i, 0), ds.channel(i, 1));
        }
    }

    #[test]
    fn sine_is_deterministic() {
        let a = generate_sine(&SineParams::default(), 50, 20, 2, 7).unwrap();
        let b = generate_sine(&SineParams::default(), 50, 20, 2, 7).unwrap();
        let c = generate_sine(&SineParams::default(), 50, 20, 2, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn default_sine_histogram_matches_proportions() {
        let ds = generate_sine(&SineParams::default(), 10_000, 100, 2, 42).unwrap();
        assert_eq!(ds.shape(), (10_000, 100, 2));
        let hist = ds.class_histogram();
        let expected = [3500usize, 2500, 2000, 1200, 800];
        for (c, &e) in expected.iter().enumerate() {
            assert!(hist[&(c as u32)].abs_diff(e) <= 1);
        }
    }

    #[test]
    fn sine_rejects_too_few_instances() {
        assert!(generate_sine(&SineParams::default(), 4, 10, 1, 0).is_err());
    }

    #[test]
    fn split_sizes() {
        let parts = split_indices(100, None, 2, 1).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), vec![50, 50]);
        let parts = split_indices(101, None, 3, 1).unwrap();
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), vec![34, 34, 33]);
        assert!(split_indices(5, None, 3, 1).is_err());
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<u32> = (0..100).map(|i| u32::from(i >= 60)).collect();
        let parts = split_indices(100, Some(&labels), 2, 5).unwrap();
        for part in &parts {
            // Brute-force per-class count.
            let zeros = part.iter().filter(|&&i| labels[i] == 0).count();
            let ones = part.len() - zeros;
            assert_eq!((zeros, ones), (30, 20));
        }
    }

    #[test]
    fn split_falls_back_for_tiny_classes() {
        let mut labels = vec![0u32; 20];
        labels[0] = 1;
        let parts = split_indices(20, Some(&labels), 3, 5).unwrap();
        assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), 20);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_a_partition(n in 6usize..200, parts in 2usize..4, seed in any::<u64>(), classes in 1u32..4) {
                prop_assume!(n >= 2 * parts);
                let labels: Vec<u32> = (0..n).map(|i| i as u32 % classes).collect();
                let out = split_indices(n, Some(&labels), parts, seed).unwrap();
                let mut all: Vec<usize> = out.iter().flatten().copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                let sizes: Vec<usize> = out.iter().map(Vec::len).collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }

            #[test]
            fn sine_is_bounded(seed in any::<u64>()) {
                let params = SineParams::default();
                let ds = generate_sine(&params, 20, 30, 2, seed).unwrap();
                let bound = params.classes.iter().map(|c| 1.5 * c.amplitude).fold(0.0, f64::max)
                    * (1.0 + params.jitter);
                prop_assert!(ds.values().iter().all(|v| v.abs() <= bound + 1e-12));
            }

            #[test]
            fn preprocess_idempotent(vals in proptest::collection::vec(-1e3f64..1e3, 40..120)) {
                let len = 10;
                let n = vals.len() / len;
                let raw = RawTable {
                    series: (0..n).map(|i| RawSeries {
                        id: i.to_string(),
                        rows: vals[i * len..(i + 1) * len].iter().map(|v| vec![*v]).collect(),
                        label: None,
                    }).collect(),
                    channels: 1,
                };
                let s = spec("p");
                let once = preprocess(&raw, &s).unwrap().dataset;
                let twice = preprocess(&RawTable::from_dataset(&once), &s).unwrap().dataset;
                prop_assert_eq!(once.values(), twice.values());
            }
        }
    }
}
