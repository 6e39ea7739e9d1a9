//! Domain types shared by every stage of a benchmark run: datasets, the
//! transformation and measure catalogs, the expected-behavior table, test
//! definitions and score trajectories.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Where a dataset sits in the data flow of a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Substitute,
    HeldOut,
    Synthetic,
}

/// `n` real-valued series of length `l` with `d` channels, stored as an `n × l × d` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array3<f64>,
    labels: Option<Vec<u32>>,
    pub name: String,
    pub role: Role,
}

impl Dataset {
    pub fn new(
        values: Array3<f64>,
        labels: Option<Vec<u32>>,
        name: impl Into<String>,
        role: Role,
    ) -> Result<Self> {
        let (n, l, d) = values.dim();
        if n < 2 || l < 2 || d < 1 {
            return Err(invalid(format!(
                "dataset shape {n}x{l}x{d} violates n >= 2, l >= 2, d >= 1"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(invalid(format!(
                    "{} labels for {n} instances",
                    labels.len()
                )));
            }
        }
        Ok(Self {
            values,
            labels,
            name: name.into(),
            role,
        })
    }

    pub fn n(&self) -> usize {
        self.values.dim().0
    }

    pub fn length(&self) -> usize {
        self.values.dim().1
    }

    pub fn channels(&self) -> usize {
        self.values.dim().2
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<f64> {
        &mut self.values
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn labels_mut(&mut self) -> Option<&mut Vec<u32>> {
        self.labels.as_mut()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Series `i` as an `l × d` view.
    pub fn instance(&self, i: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), i)
    }

    /// Channel `c` of series `i`, copied out.
    pub fn channel(&self, i: usize, c: usize) -> Vec<f64> {
        self.values
            .index_axis(Axis(0), i)
            .column(c)
            .iter()
            .copied()
            .collect()
    }

    pub fn class_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        if let Some(labels) = &self.labels {
            for &y in labels {
                *hist.entry(y).or_insert(0) += 1;
            }
        }
        hist
    }

    /// New dataset made of the given instances (in the given order).
    pub fn select(&self, indices: &[usize], role: Role) -> Dataset {
        let values = self.values.select(Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|ls| indices.iter().map(|&i| ls[i]).collect());
        Dataset {
            values,
            labels,
            name: self.name.clone(),
            role,
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Hex SHA-256 over shape, values (little-endian bits) and labels.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        let (n, l, d) = self.shape();
        for dim in [n, l, d] {
            hasher.update((dim as u64).to_le_bytes());
        }
        for v in self.values.iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        match &self.labels {
            Some(labels) => {
                hasher.update([1u8]);
                for y in labels {
                    hasher.update(y.to_le_bytes());
                }
            }
            None => hasher.update([0u8]),
        }
        hex::encode(hasher.finalize())
    }
}

/// Row-per-instance vector representation of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDataset {
    pub vectors: Array2<f64>,
    pub source: String,
    pub embedder: String,
}

impl EmbeddedDataset {
    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

/// Quality aspect a reliability indicator is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Fidelity,
    Generalization,
    Privacy,
    Representativeness,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Fidelity,
        Category::Generalization,
        Category::Privacy,
        Category::Representativeness,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Fidelity => "fidelity",
            Category::Generalization => "generalization",
            Category::Privacy => "privacy",
            Category::Representativeness => "representativeness",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a score should move as the modulation intensity grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Improve,
    Worsen,
    Constant,
    NotApplicable,
}

/// Perturbations of the real data, keyed by their configuration ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    #[serde(rename = "shuffle")]
    Shuffle,
    #[serde(rename = "gn_moderate", alias = "gaussian_noise")]
    GaussianNoise,
    #[serde(rename = "corrupt_labels", alias = "label_corruption")]
    LabelCorruption,
    #[serde(rename = "misalignment")]
    Misalignment,
    #[serde(rename = "mode_collapse")]
    ModeCollapse,
    #[serde(rename = "mode_dropping")]
    ModeDropping,
    #[serde(rename = "moving_average")]
    MovingAverage,
    #[serde(rename = "rare_event_drop")]
    RareEventDrop,
    #[serde(rename = "reverse_sub_clean", alias = "reverse_substitution")]
    ReverseSubstitution,
    #[serde(rename = "salt_and_peper_noise", alias = "salt_and_pepper")]
    SaltAndPepper,
    #[serde(rename = "segment_leaking")]
    SegmentLeaking,
    #[serde(rename = "stl_decomposition", alias = "stl_transform")]
    Stl,
    #[serde(rename = "substitution")]
    Substitution,
    #[serde(rename = "wavelet_transform")]
    Wavelet,
}

impl TransformKind {
    /// The thirteen modulated transformations (everything but the shuffle pre-step).
    pub const MODULATED: [TransformKind; 13] = [
        TransformKind::LabelCorruption,
        TransformKind::GaussianNoise,
        TransformKind::Misalignment,
        TransformKind::ModeDropping,
        TransformKind::ModeCollapse,
        TransformKind::MovingAverage,
        TransformKind::RareEventDrop,
        TransformKind::ReverseSubstitution,
        TransformKind::SaltAndPepper,
        TransformKind::SegmentLeaking,
        TransformKind::Stl,
        TransformKind::Substitution,
        TransformKind::Wavelet,
    ];

    pub fn config_id(&self) -> &'static str {
        match self {
            TransformKind::Shuffle => "shuffle",
            TransformKind::GaussianNoise => "gn_moderate",
            TransformKind::LabelCorruption => "corrupt_labels",
            TransformKind::Misalignment => "misalignment",
            TransformKind::ModeCollapse => "mode_collapse",
            TransformKind::ModeDropping => "mode_dropping",
            TransformKind::MovingAverage => "moving_average",
            TransformKind::RareEventDrop => "rare_event_drop",
            TransformKind::ReverseSubstitution => "reverse_sub_clean",
            TransformKind::SaltAndPepper => "salt_and_peper_noise",
            TransformKind::SegmentLeaking => "segment_leaking",
            TransformKind::Stl => "stl_decomposition",
            TransformKind::Substitution => "substitution",
            TransformKind::Wavelet => "wavelet_transform",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        let kind = match id {
            "shuffle" => TransformKind::Shuffle,
            "gn_moderate" | "gaussian_noise" => TransformKind::GaussianNoise,
            "corrupt_labels" | "label_corruption" => TransformKind::LabelCorruption,
            "misalignment" => TransformKind::Misalignment,
            "mode_collapse" => TransformKind::ModeCollapse,
            "mode_dropping" => TransformKind::ModeDropping,
            "moving_average" => TransformKind::MovingAverage,
            "rare_event_drop" => TransformKind::RareEventDrop,
            "reverse_sub_clean" | "reverse_substitution" => TransformKind::ReverseSubstitution,
            "salt_and_peper_noise" | "salt_and_pepper" => TransformKind::SaltAndPepper,
            "segment_leaking" => TransformKind::SegmentLeaking,
            "stl_decomposition" | "stl_transform" => TransformKind::Stl,
            "substitution" => TransformKind::Substitution,
            "wavelet_transform" => TransformKind::Wavelet,
            other => return Err(Error::UnknownId(other.to_string())),
        };
        Ok(kind)
    }

    pub fn needs_labels(&self) -> bool {
        matches!(
            self,
            TransformKind::LabelCorruption
                | TransformKind::ModeCollapse
                | TransformKind::ModeDropping
                | TransformKind::RareEventDrop
        )
    }

    pub fn needs_multivariate(&self) -> bool {
        matches!(self, TransformKind::Misalignment)
    }

    /// Consumes the substitute split `D_rs`.
    pub fn needs_substitute(&self) -> bool {
        matches!(
            self,
            TransformKind::RareEventDrop
                | TransformKind::ReverseSubstitution
                | TransformKind::SegmentLeaking
                | TransformKind::Substitution
        )
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.config_id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorEntry {
    pub transformation: TransformKind,
    pub category: Category,
    pub expectation: Expectation,
}

/// Expected score behavior for every (transformation, category) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedBehaviorTable {
    entries: BTreeMap<(TransformKind, Category), Expectation>,
}

impl ExpectedBehaviorTable {
    pub fn standard() -> Self {
        use Expectation::{Constant as C, Improve as I, NotApplicable as NA, Worsen as W};
        use TransformKind as T;
        // fidelity, generalization, privacy, representativeness
        let rows: [(TransformKind, [Expectation; 4]); 13] = [
            (T::LabelCorruption, [W, C, NA, W]),
            (T::GaussianNoise, [W, I, I, W]),
            (T::Misalignment, [W, C, I, W]),
            (T::ModeDropping, [C, C, I, W]),
            (T::ModeCollapse, [C, C, I, W]),
            (T::MovingAverage, [W, I, I, W]),
            (T::RareEventDrop, [C, C, I, W]),
            (T::ReverseSubstitution, [C, W, W, C]),
            (T::SaltAndPepper, [W, I, I, W]),
            (T::SegmentLeaking, [W, W, W, W]),
            (T::Stl, [W, I, I, W]),
            (T::Substitution, [C, I, I, C]),
            (T::Wavelet, [W, I, I, W]),
        ];
        let mut entries = BTreeMap::new();
        for (t, row) in rows {
            for (c, e) in Category::ALL.into_iter().zip(row) {
                entries.insert((t, c), e);
            }
        }
        Self { entries }
    }

    pub fn get(&self, t: TransformKind, c: Category) -> Expectation {
        self.entries
            .get(&(t, c))
            .copied()
            .unwrap_or(Expectation::NotApplicable)
    }

    /// Expectation for a chain: shuffles are neutral; two modulated members must agree.
    pub fn for_chain(&self, chain: &[TransformKind], c: Category) -> Expectation {
        let mut members = chain.iter().filter(|t| **t != TransformKind::Shuffle);
        let Some(first) = members.next() else {
            return Expectation::NotApplicable;
        };
        let e = self.get(*first, c);
        if members.all(|t| self.get(*t, c) == e) {
            e
        } else {
            Expectation::NotApplicable
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> Vec<BehaviorEntry> {
        self.entries
            .iter()
            .map(|(&(transformation, category), &expectation)| BehaviorEntry {
                transformation,
                category,
                expectation,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Vec<BehaviorEntry> = serde_json::from_str(text)?;
        let entries = list
            .into_iter()
            .map(|e| ((e.transformation, e.category), e.expectation))
            .collect();
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Real,
    Boolean,
    Pair,
}

/// Declared optimization direction of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
    /// Best at the given value; compared through the distance to it.
    TargetValue(f64),
}

impl Orientation {
    /// Maps a raw real score onto a "higher is better" axis.
    pub fn to_higher_better(&self, s: f64) -> f64 {
        match *self {
            Orientation::HigherBetter => s,
            Orientation::LowerBetter => -s,
            Orientation::TargetValue(v) => -(s - v).abs(),
        }
    }

    /// Maps a raw real score onto a "lower is better" axis.
    pub fn badness(&self, s: f64) -> f64 {
        -self.to_higher_better(s)
    }

    pub fn flipped(&self) -> Orientation {
        match *self {
            Orientation::HigherBetter => Orientation::LowerBetter,
            Orientation::LowerBetter => Orientation::HigherBetter,
            Orientation::TargetValue(v) => Orientation::TargetValue(v),
        }
    }
}

/// Data form a measure consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputForm {
    Raw,
    /// Per-channel `[0, 1]` scaling with `D_train` statistics.
    Scaled,
    Embedded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDescriptor {
    pub id: String,
    pub name: String,
    pub score_kind: ScoreKind,
    pub orientation: Orientation,
    pub input: InputForm,
    pub needs_labels: bool,
    pub needs_held_out: bool,
    pub needs_ordered_pairing: bool,
    pub needs_multivariate: bool,
    /// The original measure relied on a deep model that is replaced by a shallow one here.
    pub substituted_model: bool,
}

impl MeasureDescriptor {
    pub fn new(
        id: &str,
        name: &str,
        score_kind: ScoreKind,
        orientation: Orientation,
        input: InputForm,
    ) -> Self {
        Self {
            id: id.to_string(),
            name: name.to_string(),
            score_kind,
            orientation,
            input,
            needs_labels: false,
            needs_held_out: false,
            needs_ordered_pairing: false,
            needs_multivariate: false,
            substituted_model: false,
        }
    }

    pub fn needs_embedding(&self) -> bool {
        self.input == InputForm::Embedded
    }

    fn labels(mut self) -> Self {
        self.needs_labels = true;
        self
    }

    fn held_out(mut self) -> Self {
        self.needs_held_out = true;
        self
    }

    fn multivariate(mut self) -> Self {
        self.needs_multivariate = true;
        self
    }

    fn substituted(mut self) -> Self {
        self.substituted_model = true;
        self
    }
}

/// Measure ids from the reference configuration that this build deliberately does not implement.
pub const OUT_OF_SCOPE_MEASURES: [&str; 7] = [
    "discriminative",
    "detection_mlp",
    "detection_xgb",
    "domias",
    "sig_mmd",
    "m_top_div",
    "wcs",
];

pub fn is_out_of_scope_measure(id: &str) -> bool {
    OUT_OF_SCOPE_MEASURES.contains(&id)
}

/// Id → descriptor lookup for the compiled-in measures.
#[derive(Debug, Clone, Default)]
pub struct MeasureRegistry {
    descriptors: BTreeMap<String, MeasureDescriptor>,
}

impl MeasureRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn register(&mut self, descriptor: MeasureDescriptor) -> Result<&MeasureDescriptor> {
        if self.descriptors.contains_key(&descriptor.id) {
            return Err(Error::DuplicateId(descriptor.id));
        }
        let id = descriptor.id.clone();
        Ok(self.descriptors.entry(id).or_insert(descriptor))
    }

    pub fn get(&self, id: &str) -> Result<&MeasureDescriptor> {
        self.descriptors
            .get(id)
            .or_else(|| {
                self.descriptors
                    .values()
                    .find(|d| d.id.eq_ignore_ascii_case(id))
            })
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_ok()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.descriptors.keys().map(|s| s.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MeasureDescriptor> {
        self.descriptors.values()
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// JSON catalog of all registered descriptors (`measures.json`).
    pub fn catalog_json(&self) -> Result<String> {
        let list: Vec<&MeasureDescriptor> = self.descriptors.values().collect();
        Ok(serde_json::to_string_pretty(&list)?)
    }

    /// All 34 built-in measures.
    pub fn builtin() -> Self {
        use InputForm::{Embedded, Raw, Scaled};
        use Orientation::{HigherBetter as Hi, LowerBetter as Lo, TargetValue};
        use ScoreKind::{Boolean, Pair, Real};
        let d = MeasureDescriptor::new;
        let all = vec![
            d("acs", "ACS", Real, Hi, Scaled),
            d("alpha_precision", "alpha-Precision", Real, Hi, Embedded),
            d("ap_en", "ApEn", Real, Lo, Raw),
            d("authenticity", "Authenticity", Real, Hi, Embedded),
            d("auto_corr", "Autocorrelation", Real, Lo, Raw),
            d("beta_recall", "beta-Recall", Real, Hi, Embedded),
            d("c2st", "C2ST", Boolean, Lo, Embedded).held_out().substituted(),
            d("c_t", "C_T", Real, TargetValue(0.0), Embedded).held_out(),
            d("cas", "CAS", Real, Lo, Raw).labels().held_out().substituted(),
            d("context_fid", "Context-FID", Real, Lo, Embedded),
            d("Coverage", "Coverage", Real, Hi, Embedded),
            d("Density", "Density", Real, Hi, Embedded),
            d("detection_gmm", "Detection_GMM", Real, TargetValue(0.5), Embedded),
            d("detection_linear", "Detection_linear", Real, TargetValue(0.5), Embedded),
            d("distributional_metric", "Distr. metric", Real, Lo, Scaled),
            d("fbca", "FBCA", Real, Lo, Embedded),
            d("icd", "ICD", Real, Lo, Scaled),
            d("improved_precision", "Impr. precision", Real, Hi, Embedded),
            d("improved_recall", "Improved recall", Real, Hi, Embedded),
            d("innd", "INND", Real, Lo, Scaled),
            d("jsd", "JSD", Real, Lo, Embedded),
            d("kld", "KLD", Real, Lo, Embedded),
            d("max_rts", "Max-RTS", Real, Hi, Embedded),
            d("ndb", "NDB", Real, Lo, Embedded).held_out(),
            d("ndbou", "NDB-over/under", Pair, Lo, Embedded),
            d("onnd", "ONND", Real, Lo, Scaled),
            d("predictive", "Predictive score", Real, Lo, Scaled).substituted(),
            d("rts", "RTS", Real, Lo, Embedded),
            d("spatial", "Spatial corr.", Real, Lo, Raw).multivariate(),
            d("sts", "STS", Real, Hi, Embedded),
            d("temporal", "Temporal corr.", Real, Lo, Raw),
            d("trts", "TRTS", Real, Lo, Scaled).substituted(),
            d("tstr", "TSTR", Real, Lo, Scaled).held_out().substituted(),
            d("wd_on_pmf", "WD", Real, Lo, Embedded),
        ];
        let mut reg = Self::empty();
        for desc in all {
            reg.register(desc).expect("built-in ids are unique");
        }
        reg
    }
}

/// A single measure score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Score {
    Real(f64),
    Bool(bool),
    Pair(f64, f64),
}

impl Score {
    /// Scalar used for trajectory comparison; pairs collapse to their sum.
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Score::Real(v) => Some(v),
            Score::Pair(a, b) => Some(a + b),
            Score::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Score::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Score::Real(v) => v.is_finite(),
            Score::Pair(a, b) => a.is_finite() && b.is_finite(),
            Score::Bool(_) => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Concat,
    #[serde(rename = "statfeat")]
    StatFeat,
}

impl EmbedderKind {
    pub fn id(&self) -> &'static str {
        match self {
            EmbedderKind::Concat => "concat",
            EmbedderKind::StatFeat => "statfeat",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "concat" => Ok(EmbedderKind::Concat),
            "statfeat" | "catch22" => Ok(EmbedderKind::StatFeat),
            "ts2vec" => Err(invalid(
                "embedder `ts2vec` (trained deep representation) is not available; \
                 use `statfeat` (statistical features) or `concat` in its place",
            )),
            other => Err(Error::UnknownId(other.to_string())),
        }
    }
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Equally spaced grid `0, 1/(k-1), ..., 1`.
pub fn kappa_grid(steps: usize) -> Vec<f64> {
    assert!(steps >= 2, "a modulation path needs at least two steps");
    let last = (steps - 1) as f64;
    (0..steps).map(|i| i as f64 / last).collect()
}

pub const DEFAULT_KAPPA_STEPS: usize = 11;

/// One benchmark test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub dataset: String,
    pub transformation_chain: Vec<TransformKind>,
    pub measure: String,
    pub embedder: Option<EmbedderKind>,
    pub seed: u64,
    pub kappa_grid: Vec<f64>,
}

impl TestSpec {
    pub fn validate(&self) -> Result<()> {
        if self.transformation_chain.is_empty() || self.transformation_chain.len() > 2 {
            return Err(invalid(format!(
                "transformation chain must have 1 or 2 members, got {}",
                self.transformation_chain.len()
            )));
        }
        let grid = &self.kappa_grid;
        if grid.len() < 2 || grid[0] != 0.0 {
            return Err(invalid("kappa grid must start at 0 and have >= 2 steps"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|k| !(0.0..=1.0).contains(k)) {
            return Err(invalid("kappa grid must be strictly increasing within [0, 1]"));
        }
        Ok(())
    }

    pub fn chain_label(&self) -> String {
        self.transformation_chain
            .iter()
            .map(|t| t.config_id())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Stable id: first 16 hex chars of the SHA-256 of the canonical JSON form.
    pub fn id(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Todo,
    Ongoing,
    Successful,
    Failed,
    /// Inapplicable combination; never executed.
    Skipped,
}

impl Status {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Status::Successful | Status::Failed | Status::Skipped)
    }

    pub fn can_transition_to(&self, next: Status) -> bool {
        matches!(
            (self, next),
            (Status::Todo, Status::Ongoing)
                | (Status::Todo, Status::Skipped)
                | (Status::Ongoing, Status::Successful)
                | (Status::Ongoing, Status::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTrajectory {
    pub scores: Vec<Score>,
    pub runtimes: Vec<f64>,
    pub status: Status,
    pub failure_reason: Option<String>,
}

impl ScoreTrajectory {
    pub fn new() -> Self {
        Self {
            scores: Vec::new(),
            runtimes: Vec::new(),
            status: Status::Todo,
            failure_reason: None,
        }
    }

    pub fn transition(&mut self, next: Status) -> Result<()> {
        if !self.status.can_transition_to(next) {
            return Err(invalid(format!(
                "illegal status transition {:?} -> {next:?}",
                self.status
            )));
        }
        self.status = next;
        Ok(())
    }
}

impl Default for ScoreTrajectory {
    fn default() -> Self {
        Self::new()
    }
}

/// Shape and label facts about a prepared dataset, enough to decide applicability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub length: usize,
    pub channels: usize,
    pub has_labels: bool,
}

impl From<&Dataset> for DatasetInfo {
    fn from(ds: &Dataset) -> Self {
        Self {
            name: ds.name.clone(),
            n: ds.n(),
            length: ds.length(),
            channels: ds.channels(),
            has_labels: ds.has_labels(),
        }
    }
}

/// Which real-data splits a test needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitNeeds {
    pub substitute: bool,
    pub held_out: bool,
}

impl SplitNeeds {
    pub fn for_test(chain: &[TransformKind], measure: &MeasureDescriptor) -> Self {
        Self {
            substitute: chain.iter().any(|t| t.needs_substitute()),
            held_out: measure.needs_held_out,
        }
    }

    pub fn parts(&self) -> usize {
        if self.substitute && self.held_out {
            3
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applicability {
    pub applicable: bool,
    pub reason: Option<String>,
}

impl Applicability {
    fn yes() -> Self {
        Self {
            applicable: true,
            reason: None,
        }
    }

    fn no(reason: impl Into<String>) -> Self {
        Self {
            applicable: false,
            reason: Some(reason.into()),
        }
    }
}

/// Whether `test` can run on its dataset. Unknown ids are errors, not "inapplicable".
pub fn applicable(
    test: &TestSpec,
    datasets: &BTreeMap<String, DatasetInfo>,
    measures: &MeasureRegistry,
) -> Result<Applicability> {
    let info = datasets
        .get(&test.dataset)
        .ok_or_else(|| Error::UnknownId(test.dataset.clone()))?;
    let measure = measures.get(&test.measure)?;
    for t in &test.transformation_chain {
        if t.needs_labels() && !info.has_labels {
            return Ok(Applicability::no(format!("{t} requires labeled data")));
        }
        if t.needs_multivariate() && info.channels < 2 {
            return Ok(Applicability::no(format!("{t} requires d>1")));
        }
        if *t == TransformKind::SegmentLeaking && info.length < 8 {
            return Ok(Applicability::no("segment_leaking requires l >= 8"));
        }
        if *t == TransformKind::Wavelet && info.length < 4 {
            return Ok(Applicability::no("wavelet_transform requires l >= 4"));
        }
    }
    if measure.needs_labels && !info.has_labels {
        return Ok(Applicability::no(format!(
            "measure {} requires labeled data",
            measure.id
        )));
    }
    if measure.needs_multivariate && info.channels < 2 {
        return Ok(Applicability::no(format!("measure {} requires d>1", measure.id)));
    }
    let needs = SplitNeeds::for_test(&test.transformation_chain, measure);
    let parts = needs.parts();
    if info.n < 2 * parts {
        return Ok(Applicability::no(format!(
            "{} instances cannot be split into {parts} parts",
            info.n
        )));
    }
    if test
        .transformation_chain
        .contains(&TransformKind::ReverseSubstitution)
        && info.n / parts < 10
    {
        return Ok(Applicability::no(
            "reverse substitution requires at least 10 substitute instances",
        ));
    }
    Ok(Applicability::yes())
}
