use serde::{Deserialize, Serialize};

use super::Taxonomy;
use crate::embed::{cosine, EmbeddingMatrix};
use crate::{Error, Result};

/// Mean cosine similarity between the root-label embedding and each leaf
/// feature's embedding.
pub fn coherence_score(t: &Taxonomy, e: &EmbeddingMatrix) -> Result<f64> {
    let leaves = t.root.leaves();
    if leaves.is_empty() {
        return Err(Error::invalid("taxonomy", format!("{:?} has no leaves", t.label())));
    }
    let mut total = 0.0;
    for f in &leaves {
        let v = e
            .vector(f)
            .ok_or_else(|| Error::invalid("taxonomy", format!("no embedding for leaf {f:?}")))?;
        total += cosine(&t.root_label_embedding, v.as_slice().expect("contiguous row"));
    }
    Ok(total / leaves.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub label: String,
    pub depth: usize,
    pub leaves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyStats {
    pub count: usize,
    pub per_taxonomy: Vec<TreeStats>,
    pub mean_depth: f64,
    pub min_depth: usize,
    pub max_depth: usize,
    pub mean_leaves: f64,
    pub min_leaves: usize,
    pub max_leaves: usize,
    pub empty: usize,
}

/// Depth (root = level 1) and leaf count per taxonomy, with aggregates.
pub fn taxonomy_stats(list: &[Taxonomy]) -> Result<TaxonomyStats> {
    if list.is_empty() {
        return Err(Error::invalid("taxonomy list", "no taxonomies"));
    }
    let per: Vec<TreeStats> = list
        .iter()
        .map(|t| TreeStats {
            label: t.label().to_string(),
            depth: t.root.depth(),
            leaves: t.root.leaf_count(),
        })
        .collect();
    let n = per.len() as f64;
    Ok(TaxonomyStats {
        count: per.len(),
        mean_depth: per.iter().map(|s| s.depth as f64).sum::<f64>() / n,
        min_depth: per.iter().map(|s| s.depth).min().unwrap_or(0),
        max_depth: per.iter().map(|s| s.depth).max().unwrap_or(0),
        mean_leaves: per.iter().map(|s| s.leaves as f64).sum::<f64>() / n,
        min_leaves: per.iter().map(|s| s.leaves).min().unwrap_or(0),
        max_leaves: per.iter().map(|s| s.leaves).max().unwrap_or(0),
        empty: per.iter().filter(|s| s.leaves == 0).count(),
        per_taxonomy: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{NodeKind, TaxonomyNode};

    fn binary(depth: usize, next: &mut usize) -> TaxonomyNode {
        if depth == 1 {
            *next += 1;
            return TaxonomyNode::leaf(&format!("f{next}"));
        }
        TaxonomyNode {
            label: "x".into(),
            kind: NodeKind::Internal,
            feature: None,
            children: vec![binary(depth - 1, next), binary(depth - 1, next)],
        }
    }

    fn wrap(mut root: TaxonomyNode, emb: Vec<f64>) -> Taxonomy {
        root.kind = NodeKind::Root;
        Taxonomy {
            provenance: vec![0],
            root_label_embedding: emb,
            root,
            diagnostics: vec![],
        }
    }

    #[test]
    fn chain_and_balanced_tree() {
        let chain = wrap(
            TaxonomyNode {
                label: "bot".into(),
                kind: NodeKind::Root,
                feature: None,
                children: vec![TaxonomyNode::leaf("bot")],
            },
            vec![1.0],
        );
        let tree = wrap(binary(4, &mut 0), vec![1.0]);
        let s = taxonomy_stats(&[chain, tree]).unwrap();
        assert_eq!((s.per_taxonomy[0].depth, s.per_taxonomy[0].leaves), (2, 1));
        assert_eq!((s.per_taxonomy[1].depth, s.per_taxonomy[1].leaves), (4, 8));
        assert_eq!(s.mean_depth, 3.0);
        assert_eq!(s.mean_leaves, 4.5);
        assert_eq!(s.empty, 0);
        assert!(taxonomy_stats(&[]).is_err());
    }

    #[test]
    fn coherence_extremes() {
        let e = EmbeddingMatrix::from_rows(
            vec!["bot".into(), "chat".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            "test",
        )
        .unwrap();
        let single = wrap(
            TaxonomyNode {
                label: "bot".into(),
                kind: NodeKind::Root,
                feature: None,
                children: vec![TaxonomyNode::leaf("bot")],
            },
            vec![1.0, 0.0],
        );
        assert!((coherence_score(&single, &e).unwrap() - 1.0).abs() < 1e-12);
        let mut orth = single.clone();
        orth.root_label_embedding = vec![0.0, 1.0];
        assert_eq!(coherence_score(&orth, &e).unwrap(), 0.0);
        let mut missing = single;
        missing.root.children = vec![TaxonomyNode::leaf("voice")];
        assert!(coherence_score(&missing, &e).is_err());
    }
}
