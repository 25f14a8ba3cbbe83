//! Average-linkage dendrogram, threshold sweep and internal quality metrics.

mod linkage;
mod metrics;
mod sweep;

pub use linkage::{average_linkage, cluster_count, cut, linkage, Dendrogram, Linkage, Merge};
pub use metrics::{
    composite_score, davies_bouldin, silhouette_from_affinity, silhouette_score, silhouette_with,
    DaviesBouldin, Silhouette,
};
pub use sweep::{sweep, ClusteringCandidate, SweepConfig};

use crate::corpus::io::{read_text, write_text};
use crate::Result;
use std::path::Path;

pub fn read_candidates(path: &Path) -> Result<Vec<ClusteringCandidate>> {
    parse_candidates(&read_text(path)?)
}

pub fn parse_candidates(text: &str) -> Result<Vec<ClusteringCandidate>> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_candidates(path: &Path, candidates: &[ClusteringCandidate]) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(candidates)?)
}

impl Dendrogram {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &serde_json::to_string(self)?)
    }
}
