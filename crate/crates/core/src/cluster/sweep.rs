use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linkage::{cluster_count, cut, Dendrogram};
use super::metrics::{composite_score, davies_bouldin, silhouette_from_affinity};
use crate::embed::{AffinityMatrix, EmbeddingMatrix};
use crate::{Error, Result};

/// Threshold grid `start, start + step, ..., stop` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start: 0.1,
            stop: 0.9,
            step: 0.05,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !finite || self.start < 0.0 || self.start >= self.stop || self.step <= 0.0 {
            return Err(Error::Config(format!(
                "sweep needs 0 <= start < stop and step > 0, got start={} stop={} step={}",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    /// Grid points, rounded to 12 decimals so `0.1 + 16 * 0.05` lands on 0.9.
    pub fn thresholds(&self) -> Vec<f64> {
        let round = |x: f64| (x * 1e12).round() / 1e12;
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let t = round(self.start + f64::from(i) * self.step);
            if t > self.stop + 1e-12 {
                break;
            }
            out.push(t);
            i += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringCandidate {
    pub threshold: f64,
    pub k: usize,
    pub valid: bool,
    pub silhouette: Option<f64>,
    pub silhouette_std: Option<f64>,
    #[serde(with = "crate::float_repr", default)]
    pub davies_bouldin: Option<f64>,
    pub composite: Option<f64>,
    pub max_cluster_size: usize,
    pub assignment: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl ClusteringCandidate {
    /// Member counts per cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Feature indices grouped by cluster id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn evaluate(e: &EmbeddingMatrix, a: &AffinityMatrix, d: &Dendrogram, t: f64) -> ClusteringCandidate {
    let n = d.n_leaves;
    let assignment = cut(d, t);
    let k = cluster_count(&assignment);
    let mut sizes = vec![0usize; k];
    for &c in &assignment {
        sizes[c] += 1;
    }
    let mut cand = ClusteringCandidate {
        threshold: t,
        k,
        valid: false,
        silhouette: None,
        silhouette_std: None,
        davies_bouldin: None,
        composite: None,
        max_cluster_size: sizes.iter().copied().max().unwrap_or(0),
        assignment,
        diagnostics: Vec::new(),
    };
    if k < 2 || k + 1 > n {
        cand.diagnostics.push(format!("k = {k} outside [2, {}]", n.saturating_sub(1)));
        return cand;
    }
    let metrics = silhouette_from_affinity(a, &cand.assignment)
        .and_then(|s| davies_bouldin(e, &cand.assignment).map(|db| (s, db)));
    match metrics {
        Ok((s, db)) => {
            for (i, j) in &db.coincident_pairs {
                cand.diagnostics.push(format!("clusters {i} and {j} have coincident centroids"));
            }
            cand.valid = true;
            cand.composite = Some(composite_score(s.mean, db.score, k, n));
            cand.silhouette = Some(s.mean);
            cand.silhouette_std = Some(s.std);
            cand.davies_bouldin = Some(db.score);
        }
        Err(err) => cand.diagnostics.push(err.to_string()),
    }
    cand
}

/// Cut the dendrogram at every grid threshold and score each cut.
///
/// Candidates come back in threshold order; cuts with `k < 2` or `k > n - 1`
/// stay in the list with `valid = false` and no metrics.
pub fn sweep(
    e: &EmbeddingMatrix,
    a: &AffinityMatrix,
    d: &Dendrogram,
    config: &SweepConfig,
) -> Result<Vec<ClusteringCandidate>> {
    config.validate()?;
    d.validate()?;
    if e.len() != d.n_leaves || a.len() != d.n_leaves {
        return Err(Error::invalid(
            "dendrogram",
            format!(
                "{} leaves but {} embeddings and a {}x{} affinity matrix",
                d.n_leaves,
                e.len(),
                a.len(),
                a.len()
            ),
        ));
    }
    let candidates: Vec<_> = config
        .thresholds()
        .par_iter()
        .map(|&t| evaluate(e, a, d, t))
        .collect();
    if !candidates.iter().any(|c| c.valid) {
        return Err(Error::NoValidCandidate);
    }
    Ok(candidates)
}
