//! Content-addressed artifact cache. Entries are written to a temporary file and renamed into
//! place, carry a SHA-256 trailer, and are evicted when the trailer does not match.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use evalbench_core::model::{Dataset, EmbeddedDataset, Role, Score};
use log::warn;
use ndarray::{Array2, Array3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 4] = b"EVB1";
const TRAILER: usize = 32;

/// Hex SHA-256 of the canonical JSON form of `parts`.
pub fn key_of<T: Serialize>(parts: &T) -> String {
    let canonical = serde_json::to_vec(parts).expect("cache key serializes");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    name: String,
    role: Role,
    shape: (usize, usize, usize),
    labels: Option<Vec<u32>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddedHeader {
    source: String,
    embedder: String,
    shape: (usize, usize),
}

/// A measured score as it was first computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedScore {
    pub score: Score,
    pub runtime: f64,
}

fn encode<H: Serialize>(header: &H, payload: &[f64]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("cache header serializes");
    let mut out = Vec::with_capacity(4 + 8 + header.len() + 8 * payload.len() + TRAILER);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn decode<H: DeserializeOwned>(bytes: &[u8]) -> Option<(H, Vec<f64>)> {
    if bytes.len() < 4 + 8 + TRAILER || &bytes[..4] != MAGIC {
        return None;
    }
    let (body, trailer) = bytes.split_at(bytes.len() - TRAILER);
    if Sha256::digest(body).as_slice() != trailer {
        return None;
    }
    let header_len = u64::from_le_bytes(body[4..12].try_into().ok()?) as usize;
    let rest = body.get(12..)?;
    if header_len > rest.len() || (rest.len() - header_len) % 8 != 0 {
        return None;
    }
    let header = serde_json::from_slice(&rest[..header_len]).ok()?;
    let payload = rest[header_len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Some((header, payload))
}

fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let header = DatasetHeader {
        name: ds.name.clone(),
        role: ds.role,
        shape: ds.shape(),
        labels: ds.labels().map(<[u32]>::to_vec),
    };
    let payload: Vec<f64> = ds.values().iter().copied().collect();
    encode(&header, &payload)
}

fn decode_dataset(bytes: &[u8]) -> Option<Dataset> {
    let (h, payload): (DatasetHeader, _) = decode(bytes)?;
    let values = Array3::from_shape_vec(h.shape, payload).ok()?;
    Dataset::new(values, h.labels, h.name, h.role).ok()
}

fn encode_embedded(e: &EmbeddedDataset) -> Vec<u8> {
    let header = EmbeddedHeader {
        source: e.source.clone(),
        embedder: e.embedder.clone(),
        shape: e.vectors.dim(),
    };
    let payload: Vec<f64> = e.vectors.iter().copied().collect();
    encode(&header, &payload)
}

fn decode_embedded(bytes: &[u8]) -> Option<EmbeddedDataset> {
    let (h, payload): (EmbeddedHeader, _) = decode(bytes)?;
    let vectors = Array2::from_shape_vec(h.shape, payload).ok()?;
    Some(EmbeddedDataset {
        vectors,
        source: h.source,
        embedder: h.embedder,
    })
}

/// Artifact store under one directory. A disabled cache never hits and never writes.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
    enabled: bool,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>, enabled: bool) -> Self {
        Self {
            root: root.into(),
            enabled,
        }
    }

    pub fn disabled() -> Self {
        Self::new(PathBuf::new(), false)
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.root.join(kind).join(&key[..2]).join(format!("{key}.bin"))
    }

    fn read(&self, kind: &str, key: &str) -> Option<(PathBuf, Vec<u8>)> {
        if !self.enabled {
            return None;
        }
        let path = self.path(kind, key);
        fs::read(&path).ok().map(|b| (path, b))
    }

    fn evict(path: &Path) {
        warn!("evicting corrupt cache entry {}", path.display());
        if let Err(e) = fs::remove_file(path) {
            warn!("could not remove {}: {e}", path.display());
        }
    }

    fn write(&self, kind: &str, key: &str, bytes: &[u8]) {
        if !self.enabled {
            return;
        }
        let path = self.path(kind, key);
        if let Err(e) = publish(&path, bytes) {
            warn!("could not write cache entry {}: {e}", path.display());
        }
    }

    fn get_with<T>(&self, kind: &str, key: &str, decoder: fn(&[u8]) -> Option<T>) -> Option<T> {
        let (path, bytes) = self.read(kind, key)?;
        let value = decoder(&bytes);
        if value.is_none() {
            Self::evict(&path);
        }
        value
    }

    pub fn get_dataset(&self, key: &str) -> Option<Dataset> {
        self.get_with("datasets", key, decode_dataset)
    }

    pub fn put_dataset(&self, key: &str, ds: &Dataset) {
        self.write("datasets", key, &encode_dataset(ds));
    }

    pub fn get_embedded(&self, key: &str) -> Option<EmbeddedDataset> {
        self.get_with("embeddings", key, decode_embedded)
    }

    pub fn put_embedded(&self, key: &str, e: &EmbeddedDataset) {
        self.write("embeddings", key, &encode_embedded(e));
    }

    pub fn get_score(&self, key: &str) -> Option<CachedScore> {
        self.get_with("scores", key, |b| decode::<CachedScore>(b).map(|(h, _)| h))
    }

    pub fn put_score(&self, key: &str, score: &CachedScore) {
        self.write("scores", key, &encode(score, &[]));
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn publish(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn dataset() -> Dataset {
        let values = Array3::from_shape_fn((3, 4, 2), |(i, t, c)| i as f64 + 0.1 * t as f64 - c as f64 / 3.0);
        Dataset::new(values, Some(vec![0, 1, 0]), "x", Role::Synthetic).unwrap()
    }

    #[test]
    fn dataset_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path(), true);
        let ds = dataset();
        cache.put_dataset("ab12", &ds);
        let back = cache.get_dataset("ab12").unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.content_hash(), ds.content_hash());
    }

    #[test]
    fn corrupt_entries_are_evicted() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path(), true);
        cache.put_dataset("cd34", &dataset());
        let path = cache.path("datasets", "cd34");
        let mut bytes = fs::read(&path).unwrap();
        bytes[20] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        assert!(cache.get_dataset("cd34").is_none());
        assert!(!path.exists());
    }

    #[test]
    fn disabled_cache_never_hits() {
        let cache = Cache::disabled();
        cache.put_score("ef56", &CachedScore { score: Score::Real(1.0), runtime: 0.5 });
        assert!(cache.get_score("ef56").is_none());
    }

    #[test]
    fn keys_depend_on_every_part() {
        assert_ne!(key_of(&("a", 1u64)), key_of(&("a", 2u64)));
        assert_eq!(key_of(&("a", 1u64)).len(), 64);
    }
}
