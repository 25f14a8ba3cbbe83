use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{NodeKind, Taxonomy};
use crate::embed::cosine;
use crate::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.75;

/// Largest double below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Similarity used to gate merges.
///
/// Bit-identical embeddings score exactly 1; anything else is capped just
/// below 1 so that rounding cannot make distinct labels pass `sigma = 1`.
/// Negative cosines count as 0.
pub fn label_similarity(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) {
        return 1.0;
    }
    cosine(a, b).clamp(0.0, BELOW_ONE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    /// Root label of the taxonomy that kept its root.
    pub into: String,
    pub absorbed: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub taxonomies: Vec<Taxonomy>,
    pub events: Vec<MergeEvent>,
}

/// Ordering of taxonomies by size: more leaves, then deeper, then the
/// lexicographically smaller root label.
fn larger_first(a: &Taxonomy, b: &Taxonomy) -> Ordering {
    b.root
        .leaf_count()
        .cmp(&a.root.leaf_count())
        .then(b.root.depth().cmp(&a.root.depth()))
        .then(a.label().cmp(b.label()))
}

/// One greedy pass over all taxonomy pairs with root-label similarity
/// `>= sigma`.
///
/// Pairs are visited by descending similarity (ties: larger combined leaf
/// count first, then label order). The larger taxonomy adopts the smaller
/// one's root as a direct child and keeps its own label and embedding; an
/// absorbed taxonomy takes no further part. Similarities are never
/// recomputed, so the output order is the input order minus absorbed items.
pub fn merge_taxonomies(taxonomies: Vec<Taxonomy>, sigma: f64) -> Result<MergeOutcome> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::Config(format!("sigma must lie in [0, 1], got {sigma}")));
    }
    let n = taxonomies.len();
    let leaves: Vec<usize> = taxonomies.iter().map(|t| t.root.leaf_count()).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let sim = label_similarity(&taxonomies[i].root_label_embedding, &taxonomies[j].root_label_embedding);
            if sim >= sigma {
                pairs.push((sim, i, j));
            }
        }
    }
    let label_pair = |i: usize, j: usize| {
        let (a, b) = (taxonomies[i].label(), taxonomies[j].label());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    pairs.sort_by(|&(s1, i1, j1), &(s2, i2, j2)| {
        s2.total_cmp(&s1)
            .then((leaves[i2] + leaves[j2]).cmp(&(leaves[i1] + leaves[j1])))
            .then(label_pair(i1, j1).cmp(&label_pair(i2, j2)))
            .then((i1, j1).cmp(&(i2, j2)))
    });

    let mut slots: Vec<Option<Taxonomy>> = taxonomies.into_iter().map(Some).collect();
    let mut events = Vec::new();
    for (sim, i, j) in pairs {
        if slots[i].is_none() || slots[j].is_none() {
            continue;
        }
        let (keep, gone) = match larger_first(slots[i].as_ref().unwrap(), slots[j].as_ref().unwrap()) {
            Ordering::Greater => (j, i),
            _ => (i, j),
        };
        let mut absorbed = slots[gone].take().expect("checked above");
        let target = slots[keep].as_mut().expect("checked above");
        events.push(MergeEvent {
            into: target.label().to_string(),
            absorbed: absorbed.label().to_string(),
            similarity: sim,
        });
        absorbed.root.kind = NodeKind::Internal;
        target.root.children.push(absorbed.root);
        target.provenance.extend(absorbed.provenance);
        target.provenance.sort_unstable();
        target.provenance.dedup();
        target.diagnostics.extend(absorbed.diagnostics);
    }
    Ok(MergeOutcome {
        taxonomies: slots.into_iter().flatten().collect(),
        events,
    })
}
