use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{eval_table, EvalReport};
use crate::cluster::ClusteringCandidate;
use crate::embed::EmbeddingMatrix;
use crate::select::Selection;
use crate::taxonomy::{coherence_score, taxonomy_stats, Taxonomy, TaxonomyStats};
use crate::Result;

/// Clusters listed in the top-coherence table.
const TOP_CLUSTERS: usize = 10;
/// Member surfaces shown per top cluster.
const MEMBER_SAMPLE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub threshold: f64,
    pub k: usize,
    pub valid: bool,
    pub silhouette: Option<f64>,
    pub silhouette_std: Option<f64>,
    #[serde(with = "crate::float_repr", default)]
    pub davies_bouldin: Option<f64>,
    pub composite: Option<f64>,
    pub max_cluster_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub strategy: String,
    pub index: usize,
    pub threshold: f64,
    pub k: usize,
    pub silhouette: Option<f64>,
    #[serde(with = "crate::float_repr", default)]
    pub davies_bouldin: Option<f64>,
    pub composite: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRow {
    pub label: String,
    pub depth: usize,
    pub leaves: usize,
    pub coherence: f64,
    pub provenance: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopCluster {
    pub cluster: usize,
    pub label: String,
    pub coherence: f64,
    pub size: usize,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessRow {
    pub n_slack: usize,
    pub beta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub n_features: usize,
    pub candidates: Vec<CandidateRow>,
    pub selection: SelectionRow,
    pub cluster_count: usize,
    pub taxonomy_count: usize,
    pub taxonomies: Vec<TaxonomyRow>,
    pub structure: TaxonomyStats,
    pub top_clusters: Vec<TopCluster>,
    pub correctness: Vec<CorrectnessRow>,
}

pub struct ReportInputs<'a> {
    pub embeddings: &'a EmbeddingMatrix,
    pub candidates: &'a [ClusteringCandidate],
    pub selection: &'a Selection,
    /// Per-cluster taxonomies before merging; ranked for the top list.
    pub clusters: &'a [Taxonomy],
    /// Taxonomies after merging.
    pub taxonomies: &'a [Taxonomy],
    pub eval: &'a [EvalReport],
}

pub fn quality_report(inp: &ReportInputs<'_>) -> Result<QualityReport> {
    let candidates = inp
        .candidates
        .iter()
        .map(|c| CandidateRow {
            threshold: c.threshold,
            k: c.k,
            valid: c.valid,
            silhouette: c.silhouette,
            silhouette_std: c.silhouette_std,
            davies_bouldin: c.davies_bouldin,
            composite: c.composite,
            max_cluster_size: c.max_cluster_size,
        })
        .collect();
    let chosen = &inp.candidates[inp.selection.chosen];
    let selection = SelectionRow {
        strategy: format!("{:?}", inp.selection.strategy).to_lowercase(),
        index: inp.selection.chosen,
        threshold: chosen.threshold,
        k: chosen.k,
        silhouette: chosen.silhouette,
        davies_bouldin: chosen.davies_bouldin,
        composite: chosen.composite,
    };

    let structure = taxonomy_stats(inp.taxonomies)?;
    let taxonomies = inp
        .taxonomies
        .iter()
        .zip(&structure.per_taxonomy)
        .map(|(t, s)| {
            Ok(TaxonomyRow {
                label: s.label.clone(),
                depth: s.depth,
                leaves: s.leaves,
                coherence: coherence_score(t, inp.embeddings)?,
                provenance: t.provenance.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut top = inp
        .clusters
        .iter()
        .map(|t| {
            let members = t.root.leaves();
            Ok(TopCluster {
                cluster: t.provenance.first().copied().unwrap_or(0),
                label: t.label().to_string(),
                coherence: coherence_score(t, inp.embeddings)?,
                size: members.len(),
                members: members.iter().take(MEMBER_SAMPLE).map(|s| s.to_string()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    top.sort_by(|a, b| {
        b.coherence
            .total_cmp(&a.coherence)
            .then(b.size.cmp(&a.size))
            .then(a.cluster.cmp(&b.cluster))
    });
    top.truncate(TOP_CLUSTERS);

    let correctness = inp
        .eval
        .iter()
        .map(|r| CorrectnessRow {
            n_slack: r.n_slack,
            beta: r.beta,
            precision: r.precision,
            recall: r.recall,
            f_beta: r.f_beta,
            matched: r.matched,
            predicted: r.predicted_total,
            gold: r.gold_total,
        })
        .collect();

    Ok(QualityReport {
        n_features: inp.embeddings.len(),
        candidates,
        cluster_count: chosen.k,
        selection,
        taxonomy_count: inp.taxonomies.len(),
        taxonomies,
        structure,
        top_clusters: top,
        correctness,
    })
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "-".into(),
    }
}

impl QualityReport {
    /// Plain-text rendering of the report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "features: {}", self.n_features);
        let _ = writeln!(s, "\nthreshold sweep");
        let _ = writeln!(s, "{:>9} {:>5} {:>10} {:>8} {:>9} {:>8}", "threshold", "k", "silhouette", "db", "composite", "max_size");
        for c in &self.candidates {
            let _ = writeln!(
                s,
                "{:>9.2} {:>5} {:>10} {:>8} {:>9} {:>8}{}",
                c.threshold,
                c.k,
                opt(c.silhouette),
                opt(c.davies_bouldin),
                opt(c.composite),
                c.max_cluster_size,
                if c.valid { "" } else { "  (invalid)" }
            );
        }
        let sel = &self.selection;
        let _ = writeln!(
            s,
            "\nselected ({}): threshold {:.2}, k = {}, silhouette {}, db {}",
            sel.strategy,
            sel.threshold,
            sel.k,
            opt(sel.silhouette),
            opt(sel.davies_bouldin)
        );
        let st = &self.structure;
        let _ = writeln!(
            s,
            "\ntaxonomies: {} (depth mean {:.2}, min {}, max {}; leaves mean {:.2}, min {}, max {}; empty {})",
            st.count, st.mean_depth, st.min_depth, st.max_depth, st.mean_leaves, st.min_leaves, st.max_leaves, st.empty
        );
        for t in &self.taxonomies {
            let _ = writeln!(s, "  {:<32} depth {:>2}  leaves {:>4}  coherence {:.3}", t.label, t.depth, t.leaves, t.coherence);
        }
        let _ = writeln!(s, "\ntop clusters by coherence");
        for c in &self.top_clusters {
            let _ = writeln!(s, "  {:.3}  {:<28} ({}) {}", c.coherence, c.label, c.size, c.members.join(", "));
        }
        if !self.correctness.is_empty() {
            let _ = writeln!(s, "\nextraction correctness");
            let rows: Vec<EvalReport> = self
                .correctness
                .iter()
                .map(|r| EvalReport {
                    n_slack: r.n_slack,
                    beta: r.beta,
                    matched: r.matched,
                    predicted_total: r.predicted,
                    gold_total: r.gold,
                    precision: r.precision,
                    recall: r.recall,
                    f_beta: r.f_beta,
                    reviews: vec![],
                })
                .collect();
            s.push_str(&eval_table(&rows));
        }
        s
    }
}
