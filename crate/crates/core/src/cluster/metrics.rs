//! Internal clustering quality metrics.

use serde::{Deserialize, Serialize};

use crate::embed::{AffinityMatrix, EmbeddingMatrix};
use crate::{Error, Result};

/// Mean per-sample silhouette plus the spread of the per-sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub mean: f64,
    pub std: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaviesBouldin {
    /// `+inf` when some pair of centroids coincides.
    pub score: f64,
    /// Cluster pairs whose centroid distance fell below 1e-12.
    pub coincident_pairs: Vec<(usize, usize)>,
}

/// Remap arbitrary labels to `0..k` in order of first appearance.
fn compact(assignment: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let labels = assignment
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (labels, map.len())
}

/// Silhouette over a precomputed dissimilarity matrix.
///
/// `s(i) = (b - a) / max(a, b)` with `a` the mean distance to the other
/// members of `i`'s cluster and `b` the smallest mean distance to another
/// cluster. Singletons and `max(a, b) = 0` score 0. Requires `2 <= k <= n - 1`.
pub fn silhouette_with(dist: impl Fn(usize, usize) -> f64, assignment: &[usize]) -> Result<Silhouette> {
    let n = assignment.len();
    let (labels, k) = compact(assignment);
    if k < 2 || k + 1 > n {
        return Err(Error::UndefinedMetric(format!(
            "silhouette needs 2 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    let mut sizes = vec![0usize; k];
    for &c in &labels {
        sizes[c] += 1;
    }
    let mut samples = Vec::with_capacity(n);
    let mut sums = vec![0.0f64; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(i, j);
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            samples.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        samples.push(if m > 0.0 { (b - a) / m } else { 0.0 });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Silhouette {
        mean,
        std: var.sqrt(),
        samples,
    })
}

/// Silhouette under cosine dissimilarity of the embedding rows.
pub fn silhouette_score(e: &EmbeddingMatrix, assignment: &[usize]) -> Result<Silhouette> {
    check_len(e.len(), assignment.len())?;
    let v = e.vectors();
    silhouette_with(|i, j| (1.0 - v.row(i).dot(&v.row(j))).clamp(0.0, 2.0), assignment)
}

/// Silhouette reading distances from an affinity matrix.
pub fn silhouette_from_affinity(a: &AffinityMatrix, assignment: &[usize]) -> Result<Silhouette> {
    check_len(a.len(), assignment.len())?;
    silhouette_with(|i, j| a.get(i, j), assignment)
}

fn check_len(rows: usize, labels: usize) -> Result<()> {
    if rows != labels {
        return Err(Error::invalid(
            "assignment",
            format!("{labels} labels for {rows} points"),
        ));
    }
    Ok(())
}

/// Davies-Bouldin index in Euclidean geometry over the (unit) rows.
///
/// Centroids are plain means (not re-normalised); `S_i` is the mean distance
/// of members to their centroid and `M_ij` the centroid distance.
pub fn davies_bouldin(e: &EmbeddingMatrix, assignment: &[usize]) -> Result<DaviesBouldin> {
    check_len(e.len(), assignment.len())?;
    let (labels, k) = compact(assignment);
    if k < 2 {
        return Err(Error::UndefinedMetric(format!("Davies-Bouldin needs k >= 2, got {k}")));
    }
    let dim = e.dim();
    let v = e.vectors();
    let mut centroids = vec![vec![0.0f64; dim]; k];
    let mut sizes = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        sizes[c] += 1;
        for (acc, x) in centroids[c].iter_mut().zip(v.row(i).iter()) {
            *acc += x;
        }
    }
    for (c, s) in centroids.iter_mut().zip(&sizes) {
        c.iter_mut().for_each(|x| *x /= *s as f64);
    }
    let euclid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let mut scatter = vec![0.0f64; k];
    for (i, &c) in labels.iter().enumerate() {
        let row = v.row(i);
        scatter[c] += euclid(row.as_slice().expect("standard layout"), &centroids[c]);
    }
    for (s, n) in scatter.iter_mut().zip(&sizes) {
        *s /= *n as f64;
    }

    let mut coincident = Vec::new();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = euclid(&centroids[i], &centroids[j]);
            let ratio = if m < 1e-12 {
                if i < j {
                    coincident.push((i, j));
                }
                f64::INFINITY
            } else {
                (scatter[i] + scatter[j]) / m
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(DaviesBouldin {
        score: total / k as f64,
        coincident_pairs: coincident,
    })
}

/// Weighted blend used to rank sweep candidates:
/// `0.5 (s + 1) / 2 + 0.3 / (1 + db) + 0.2 (1 - k / n)`.
pub fn composite_score(silhouette: f64, davies_bouldin: f64, k: usize, n: usize) -> f64 {
    0.5 * (silhouette + 1.0) / 2.0 + 0.3 * (1.0 / (1.0 + davies_bouldin)) + 0.2 * (1.0 - k as f64 / n as f64)
}
