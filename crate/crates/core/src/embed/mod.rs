//! Feature embeddings and the cosine affinity matrix.

mod cache;
mod hashing;
mod remote;

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

pub use cache::{
    decode_binary, encode_binary, parse_vector_cache_jsonl, BinaryVectors, CachedEmbedder,
    VectorCache, BINARY_MAGIC,
};
pub use hashing::{hashing_embed, HashingEmbedder};
pub use remote::{parse_embedding_response, RemoteEmbedder};

use crate::corpus::FeatureSet;
use crate::{Error, Result};

/// Largest feature count for which the dense n×n affinity is materialised.
pub const MAX_DENSE_FEATURES: usize = 20_000;

/// Anything that turns text into vectors.
///
/// Implementations need not normalise; callers in this module always rescale
/// rows to unit length.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier recorded in run manifests.
    fn tag(&self) -> String;

    /// One vector per input, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<T> {
    fn tag(&self) -> String {
        (**self).tag()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).embed_batch(texts)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for &T {
    fn tag(&self) -> String {
        (**self).tag()
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).embed_batch(texts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_in_flight: 4,
        }
    }
}

/// Scale `v` to unit length; `None` for zero or non-finite input.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

/// Cosine similarity of two vectors of any length; 0 when either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Embed `texts` in batches with bounded concurrency and normalise each row.
///
/// Output order always matches input order. Batches that fail (after the
/// provider's own retries) or return unusable rows are collected and reported
/// together; a batch with a different dimension aborts immediately.
pub fn embed_texts(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
    opts: EmbedOptions,
) -> Result<Vec<Vec<f64>>> {
    let batches: Vec<&[String]> = texts.chunks(opts.batch_size.max(1)).collect();
    let mut results: Vec<Result<Vec<Vec<f64>>>> = Vec::with_capacity(batches.len());
    for wave in batches.chunks(opts.max_in_flight.max(1)) {
        if wave.len() == 1 {
            results.push(provider.embed_batch(wave[0]));
            continue;
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|batch| s.spawn(move || provider.embed_batch(batch)))
                .collect();
            for h in handles {
                results.push(h.join().unwrap_or_else(|_| {
                    Err(Error::invalid("embedding provider", "worker panicked"))
                }));
            }
        });
    }

    let mut out = Vec::with_capacity(texts.len());
    let mut failed = Vec::new();
    let mut reasons = Vec::new();
    let mut dim = None;
    for (batch, result) in batches.iter().zip(results) {
        let rows = match result {
            Ok(rows) if rows.len() == batch.len() => rows,
            Ok(rows) => {
                failed.extend(batch.iter().cloned());
                reasons.push(format!("{} vectors for {} inputs", rows.len(), batch.len()));
                continue;
            }
            Err(e) => {
                failed.extend(batch.iter().cloned());
                reasons.push(e.to_string());
                continue;
            }
        };
        for (text, row) in batch.iter().zip(rows) {
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: row.len(),
                    })
                }
                _ => {}
            }
            match normalize(&row) {
                Some(v) => out.push(v),
                None => {
                    failed.push(text.clone());
                    reasons.push(format!("{text:?}: zero or non-finite vector"));
                }
            }
        }
    }
    if !failed.is_empty() {
        reasons.dedup();
        return Err(Error::EmbeddingFailed {
            failed,
            reason: reasons.join("; "),
        });
    }
    Ok(out)
}

/// Row-per-feature unit vectors aligned with feature surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    vectors: Array2<f64>,
    provider_tag: String,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    /// Validate and normalise rows. Ids must be unique, rows at least
    /// two-dimensional, equally sized, finite and non-zero.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f64>>, provider_tag: impl Into<String>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::invalid(
                "embedding matrix",
                format!("{} ids for {} rows", ids.len(), rows.len()),
            ));
        }
        let dim = rows.first().map_or(2, Vec::len);
        if dim < 2 {
            return Err(Error::invalid("embedding matrix", format!("dimension {dim} < 2")));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            let unit = normalize(row).ok_or_else(|| {
                Error::invalid("embedding matrix", format!("zero or non-finite vector for {id:?}"))
            })?;
            flat.extend(unit);
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid("embedding matrix", format!("duplicate id {id:?}")));
            }
        }
        let vectors = Array2::from_shape_vec((ids.len(), dim), flat).expect("shape checked");
        Ok(Self {
            ids,
            vectors,
            provider_tag: provider_tag.into(),
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn provider_tag(&self) -> &str {
        &self.provider_tag
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn index_of(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn vector(&self, surface: &str) -> Option<ArrayView1<'_, f64>> {
        self.index_of(surface).map(|i| self.row(i))
    }

    /// Rows as a vector cache, in row order.
    pub fn to_cache(&self) -> VectorCache {
        let mut c = VectorCache::new();
        for (i, id) in self.ids.iter().enumerate() {
            c.insert(id.clone(), self.row(i).to_vec());
        }
        c
    }
}

/// Embed every distinct surface of `features`, in feature-set order.
pub fn embed_features(
    features: &FeatureSet,
    provider: &dyn EmbeddingProvider,
    opts: EmbedOptions,
) -> Result<EmbeddingMatrix> {
    if features.is_empty() {
        return Err(Error::invalid("feature set", "nothing to embed"));
    }
    let ids = features.unique_surfaces();
    let rows = embed_texts(provider, &ids, opts)?;
    EmbeddingMatrix::from_rows(ids, rows, provider.tag())
}

/// Symmetric cosine dissimilarity matrix with an exact zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    dist: Array2<f64>,
}

impl AffinityMatrix {
    pub const METRIC: &'static str = "cosine";

    /// Wrap a precomputed dissimilarity matrix after checking that it is
    /// square, symmetric within 1e-12, finite, within `[0, 2]` and zero on the
    /// diagonal.
    pub fn from_matrix(dist: Array2<f64>) -> Result<Self> {
        let n = dist.nrows();
        if dist.ncols() != n {
            return Err(Error::invalid("affinity matrix", "not square"));
        }
        for i in 0..n {
            if dist[[i, i]] != 0.0 {
                return Err(Error::invalid("affinity matrix", format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let d = dist[[i, j]];
                if !(0.0..=2.0).contains(&d) {
                    return Err(Error::invalid("affinity matrix", format!("entry ({i},{j}) = {d} outside [0, 2]")));
                }
                if (d - dist[[j, i]]).abs() > 1e-12 {
                    return Err(Error::invalid("affinity matrix", format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { dist })
    }

    pub fn len(&self) -> usize {
        self.dist.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.nrows() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[[i, j]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.dist
    }
}

/// `dist[i][j] = 1 - <v_i, v_j>` over unit rows, computed row-parallel.
pub fn affinity(e: &EmbeddingMatrix) -> Result<AffinityMatrix> {
    let n = e.len();
    if n > MAX_DENSE_FEATURES {
        return Err(Error::TooManyFeatures {
            n,
            max: MAX_DENSE_FEATURES,
        });
    }
    let v = e.vectors();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let vi = v.row(i);
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        (1.0 - vi.dot(&v.row(j))).clamp(0.0, 2.0)
                    }
                })
                .collect()
        })
        .collect();
    let dist = Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect())
        .expect("n*n entries");
    Ok(AffinityMatrix { dist })
}
