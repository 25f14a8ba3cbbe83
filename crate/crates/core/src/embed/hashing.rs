use std::hash::Hasher;

use fnv::FnvHasher;

use super::EmbeddingProvider;
use crate::{Error, Result};

/// Signed feature hashing of character 3-grams.
///
/// The surface is padded with one space on each side, every character
/// trigram is hashed (FNV-1a keyed by the seed) to a bucket with a ±1 sign,
/// and the bag is L2-normalised. Output depends only on
/// `(surface, dim, seed)`.
pub fn hashing_embed(surface: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 8, "hashing dimension must be at least 8");
    let padded: Vec<char> = std::iter::once(' ')
        .chain(surface.chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut v = vec![0.0f64; dim];
    let mut buf = [0u8; 12];
    for gram in padded.windows(3) {
        let mut len = 0;
        for c in gram {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let mut h = FnvHasher::with_key(seed ^ 0xcbf2_9ce4_8422_2325);
        h.write(&buf[..len]);
        let hash = h.finish();
        let bucket = (hash % dim as u64) as usize;
        let sign = if hash >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Every trigram cancelled out; fall back to a single bucket so the
        // vector stays a unit vector.
        let mut h = FnvHasher::with_key(seed);
        h.write(surface.as_bytes());
        v[(h.finish() % dim as u64) as usize] = 1.0;
        return v;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Offline, deterministic embedding provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::invalid("hashing dimension", format!("{dim} < 8")));
        }
        Ok(Self { dim, seed })
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 384, seed: 0 }
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn tag(&self) -> String {
        format!("hashing-char3/d{}/s{}", self.dim, self.seed)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|t| hashing_embed(t, self.dim, self.seed))
            .collect())
    }
}
