//! Content-addressed binary cache for distance matrices.
//!
//! File layout: magic `GDD1`, the 32-byte key, rows and cols as little-endian
//! `u64`, then the matrix as little-endian `f64` in row-major order.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GDD1";
const HEADER: usize = 4 + 32 + 16;

/// Everything a cached matrix depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    /// What is stored, e.g. `"linear-fgw"` or `"label-cost"`.
    pub kind: String,
    pub dataset_hash: String,
    pub alpha: f64,
    pub order: u32,
    pub nbar: Option<usize>,
    pub c: f64,
    pub seed: u64,
    /// Any further distinguishing text (e.g. a split hash).
    pub extra: String,
}

impl CacheKey {
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for part in [self.kind.as_str(), self.dataset_hash.as_str(), self.extra.as_str()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.update(self.alpha.to_bits().to_le_bytes());
        h.update(u64::from(self.order).to_le_bytes());
        h.update(self.nbar.map_or(u64::MAX, |v| v as u64).to_le_bytes());
        h.update(self.c.to_bits().to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.finalize().into()
    }
}

#[derive(Debug, Clone)]
pub struct DistanceCache {
    dir: PathBuf,
}

impl DistanceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.gdd", hex::encode(key.digest())))
    }

    /// The cached matrix, or `None` when absent.
    pub fn load(&self, key: &CacheKey) -> Result<Option<Array2<f64>>> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        decode(&bytes, &key.digest()).map(Some)
    }

    pub fn store(&self, key: &CacheKey, m: &Array2<f64>) -> Result<()> {
        super::write_atomic(&self.path(key), &encode(m, &key.digest()))
    }

    /// Cached value, computing and storing it on a miss.
    pub fn get_or_compute<F>(&self, key: &CacheKey, compute: F) -> Result<Array2<f64>>
    where
        F: FnOnce() -> Result<Array2<f64>>,
    {
        if let Some(m) = self.load(key)? {
            log::debug!("cache hit {}", self.path(key).display());
            return Ok(m);
        }
        let m = compute()?;
        self.store(key, &m)?;
        Ok(m)
    }
}

fn encode(m: &Array2<f64>, key: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(key);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], key: &[u8; 32]) -> Result<Array2<f64>> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(Error::CorruptCache("bad magic".into()));
    }
    if &bytes[4..36] != key {
        return Err(Error::CorruptCache("key does not match file name".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes")) as usize;
    let (rows, cols) = (word(36), word(44));
    let expected = rows.checked_mul(cols).and_then(|k| k.checked_mul(8)).and_then(|k| k.checked_add(HEADER));
    if expected != Some(bytes.len()) {
        return Err(Error::CorruptCache(format!("{rows}x{cols} matrix in {} bytes", bytes.len())));
    }
    let values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("checked size"))
}
