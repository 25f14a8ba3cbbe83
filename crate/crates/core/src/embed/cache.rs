//! Vector cache files.
//!
//! JSONL form: one `{"surface": str, "vector": [float, ...]}` per line.
//! Binary form: magic `FECLV1`, `u32` row count, `u32` dimension (both
//! little-endian), then `n * dim` little-endian `f32` values row by row.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::EmbeddingProvider;
use crate::corpus::io::{read_text, write_text};
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 6] = b"FECLV1";

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    surface: String,
    vector: Vec<f64>,
}

/// Surface → vector map that remembers insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorCache {
    surfaces: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl VectorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<&[f64]> {
        self.index.get(surface).map(|&i| self.vectors[i].as_slice())
    }

    /// Insert or replace.
    pub fn insert(&mut self, surface: String, vector: Vec<f64>) {
        match self.index.get(&surface) {
            Some(&i) => self.vectors[i] = vector,
            None => {
                self.index.insert(surface.clone(), self.surfaces.len());
                self.surfaces.push(surface);
                self.vectors.push(vector);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.surfaces
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter().map(Vec::as_slice))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for (surface, vector) in self.iter() {
            s.push_str(&serde_json::to_string(&CacheLine {
                surface: surface.to_string(),
                vector: vector.to_vec(),
            })?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_vector_cache_jsonl(&read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_jsonl()?)
    }
}

/// Parse a JSONL vector cache; all vectors must share one finite dimension.
pub fn parse_vector_cache_jsonl(text: &str) -> Result<VectorCache> {
    let mut cache = VectorCache::new();
    let mut dim = None;
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            what: "vector cache",
            line: i + 1,
            msg,
        };
        let rec: CacheLine = serde_json::from_str(l).map_err(|e| err(e.to_string()))?;
        if rec.vector.is_empty() || rec.vector.iter().any(|x| !x.is_finite()) {
            return Err(err("vector must be non-empty and finite".into()));
        }
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(d) if d != rec.vector.len() => {
                return Err(err(format!("dimension {} differs from {d}", rec.vector.len())))
            }
            _ => {}
        }
        cache.insert(rec.surface, rec.vector);
    }
    Ok(cache)
}

/// Rows decoded from the binary cache format.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryVectors {
    pub n: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl BinaryVectors {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn encode_binary(rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("binary cache", "rows differ in dimension"));
    }
    let n = u32::try_from(rows.len()).map_err(|_| Error::invalid("binary cache", "too many rows"))?;
    let d = u32::try_from(dim).map_err(|_| Error::invalid("binary cache", "dimension too large"))?;
    let mut out = Vec::with_capacity(14 + rows.len() * dim * 4);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for x in rows.iter().flatten() {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<BinaryVectors> {
    let err = |msg: &str| Error::invalid("binary cache", msg);
    let rest = bytes.strip_prefix(BINARY_MAGIC).ok_or_else(|| err("missing FECLV1 header"))?;
    if rest.len() < 8 {
        return Err(err("truncated header"));
    }
    let n = u32::from_le_bytes(rest[0..4].try_into().expect("4 bytes")) as usize;
    let dim = u32::from_le_bytes(rest[4..8].try_into().expect("4 bytes")) as usize;
    let body = &rest[8..];
    let expected = n
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| err("size overflow"))?;
    if body.len() != expected {
        return Err(Error::invalid(
            "binary cache",
            format!("expected {expected} payload bytes for {n}x{dim}, found {}", body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(BinaryVectors { n, dim, data })
}

/// Provider wrapper that serves hits from a cache and fills it with misses.
pub struct CachedEmbedder<P> {
    inner: P,
    cache: Mutex<VectorCache>,
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P, cache: VectorCache) -> Self {
        Self {
            inner,
            cache: Mutex::new(cache),
        }
    }

    pub fn into_cache(self) -> VectorCache {
        self.cache.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn tag(&self) -> String {
        self.inner.tag()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let misses: Vec<String> = {
            let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            texts.iter().filter(|t| cache.get(t).is_none()).cloned().collect()
        };
        if !misses.is_empty() {
            let fresh = self.inner.embed_batch(&misses)?;
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            for (s, v) in misses.into_iter().zip(fresh) {
                cache.insert(s, v);
            }
        }
        let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(texts
            .iter()
            .map(|t| cache.get(t).expect("filled above").to_vec())
            .collect())
    }
}
