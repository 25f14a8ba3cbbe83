use std::collections::HashSet;

use super::label::stub_label;
use super::{NodeKind, TaxonomyNode};
use crate::cluster::Dendrogram;
use crate::{Error, Result};

pub const DEFAULT_MIN_SUBTREE_SIZE: usize = 4;

enum Tmp {
    Leaf(usize),
    Inner { children: Vec<usize>, leaves: usize },
}

impl Tmp {
    fn leaves(&self) -> usize {
        match self {
            Tmp::Leaf(_) => 1,
            Tmp::Inner { leaves, .. } => *leaves,
        }
    }
}

/// Tree for one cluster, cut out of the full dendrogram.
///
/// The dendrogram is restricted to `members`, unary chains collapse away and
/// internal nodes with fewer than `min_subtree_size` leaves dissolve into
/// their parent. Leaves carry `surfaces[member]`; the root and internal nodes
/// get stub labels until a labeller replaces them.
pub fn build_hierarchy(
    members: &[usize],
    d: &Dendrogram,
    surfaces: &[String],
    min_subtree_size: usize,
) -> Result<TaxonomyNode> {
    d.validate()?;
    let n = d.n_leaves;
    if members.is_empty() {
        return Err(Error::invalid("cluster", "no members"));
    }
    if surfaces.len() != n {
        return Err(Error::invalid(
            "cluster",
            format!("{} surfaces for a dendrogram over {n} leaves", surfaces.len()),
        ));
    }
    let mut seen = HashSet::new();
    for &m in members {
        if m >= n || !seen.insert(m) {
            return Err(Error::invalid("cluster", format!("member {m} out of range or repeated")));
        }
    }

    let mut arena: Vec<Tmp> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; n + d.merges.len()];
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    for &m in &sorted {
        slot[m] = Some(arena.len());
        arena.push(Tmp::Leaf(m));
    }
    for (s, merge) in d.merges.iter().enumerate() {
        slot[n + s] = match (slot[merge.left], slot[merge.right]) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x),
            (Some(a), Some(b)) => {
                let leaves = arena[a].leaves() + arena[b].leaves();
                arena.push(Tmp::Inner {
                    children: vec![a, b],
                    leaves,
                });
                Some(arena.len() - 1)
            }
        };
    }
    // every member sits under the final merge (or is the lone leaf)
    let root = slot[n + d.merges.len() - 1].expect("members are non-empty");

    // Children always precede parents in the arena, so one forward pass
    // flattens bottom-up.
    for x in 0..arena.len() {
        let Tmp::Inner { children, .. } = &arena[x] else { continue };
        let mut flat = Vec::with_capacity(children.len());
        for &c in children {
            match &arena[c] {
                Tmp::Inner { children: grand, leaves } if *leaves < min_subtree_size => {
                    flat.extend_from_slice(grand)
                }
                _ => flat.push(c),
            }
        }
        if let Tmp::Inner { children, .. } = &mut arena[x] {
            *children = flat;
        }
    }

    let mut reachable = vec![false; arena.len()];
    let mut stack = vec![root];
    while let Some(x) = stack.pop() {
        reachable[x] = true;
        if let Tmp::Inner { children, .. } = &arena[x] {
            stack.extend(children);
        }
    }
    let mut built: Vec<Option<TaxonomyNode>> = (0..arena.len()).map(|_| None).collect();
    for x in 0..arena.len() {
        if !reachable[x] {
            continue;
        }
        built[x] = Some(match &arena[x] {
            Tmp::Leaf(m) => TaxonomyNode::leaf(&surfaces[*m]),
            Tmp::Inner { children, .. } => {
                let kids: Vec<TaxonomyNode> = children
                    .iter()
                    .map(|&c| built[c].take().expect("child built before parent"))
                    .collect();
                let mut node = TaxonomyNode {
                    label: String::new(),
                    kind: NodeKind::Internal,
                    feature: None,
                    children: kids,
                };
                node.label = stub_label(&node.leaves());
                node
            }
        });
    }
    let mut top = built[root].take().expect("root is reachable");
    if top.kind == NodeKind::Leaf {
        let label = stub_label(&[top.label.as_str()]);
        top = TaxonomyNode {
            label,
            kind: NodeKind::Root,
            feature: None,
            children: vec![top],
        };
    }
    top.kind = NodeKind::Root;
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{average_linkage, Merge};
    use crate::embed::AffinityMatrix;
    use ndarray::Array2;

    fn surfaces(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn merge(left: usize, right: usize, height: f64, size: usize) -> Merge {
        Merge {
            left,
            right,
            height,
            size,
        }
    }

    /// 4 joins ((0,1),(2,3)), then (5,(6,7)); 0..8 merged at the top.
    fn eight() -> Dendrogram {
        Dendrogram {
            n_leaves: 8,
            merges: vec![
                merge(0, 1, 0.1, 2),  // 8
                merge(2, 3, 0.1, 2),  // 9
                merge(8, 9, 0.2, 4),  // 10
                merge(6, 7, 0.2, 2),  // 11
                merge(4, 10, 0.3, 5), // 12
                merge(5, 11, 0.3, 3), // 13
                merge(12, 13, 0.5, 8),
            ],
        }
    }

    fn shape(node: &TaxonomyNode) -> String {
        match node.kind {
            NodeKind::Leaf => node.feature.clone().unwrap(),
            _ => format!("({})", node.children.iter().map(shape).collect::<Vec<_>>().join(" ")),
        }
    }

    #[test]
    fn one_member_is_root_over_leaf() {
        let d = eight();
        let t = build_hierarchy(&[3], &d, &surfaces(8), 4).unwrap();
        assert_eq!(t.kind, NodeKind::Root);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.label, "f3");
    }

    #[test]
    fn two_members_are_siblings() {
        let t = build_hierarchy(&[0, 5], &eight(), &surfaces(8), 4).unwrap();
        assert_eq!(shape(&t), "(f0 f5)");
        t.validate().unwrap();
    }

    #[test]
    fn small_subtrees_flatten() {
        let t = build_hierarchy(&(0..8).collect::<Vec<_>>(), &eight(), &surfaces(8), 4).unwrap();
        // 10 (4 leaves) and 12 (5 leaves) survive; 13 (3 leaves) flattens.
        assert_eq!(shape(&t), "((f4 (f0 f1 f2 f3)) f5 f6 f7)");
        assert_eq!(t.leaf_count(), 8);
        t.validate().unwrap();
    }

    #[test]
    fn restriction_collapses_unary_chains() {
        let t = build_hierarchy(&[0, 2, 6, 7], &eight(), &surfaces(8), 2).unwrap();
        assert_eq!(shape(&t), "((f0 f2) (f6 f7))");
    }

    #[test]
    fn without_flattening_it_is_the_restricted_tree() {
        let t = build_hierarchy(&(0..8).collect::<Vec<_>>(), &eight(), &surfaces(8), 0).unwrap();
        assert_eq!(shape(&t), "((f4 ((f0 f1) (f2 f3))) (f5 (f6 f7)))");
        assert_eq!(t.depth(), 5);
    }

    #[test]
    fn single_leaf_dendrogram() {
        let d = Dendrogram {
            n_leaves: 1,
            merges: vec![],
        };
        let t = build_hierarchy(&[0], &d, &["bot".to_string()], 4).unwrap();
        assert_eq!(t.label, "bot");
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn bad_members() {
        let d = eight();
        assert!(build_hierarchy(&[], &d, &surfaces(8), 4).is_err());
        assert!(build_hierarchy(&[8], &d, &surfaces(8), 4).is_err());
        assert!(build_hierarchy(&[1, 1], &d, &surfaces(8), 4).is_err());
        assert!(build_hierarchy(&[1], &d, &surfaces(7), 4).is_err());
    }

    #[test]
    fn deep_chain_does_not_recurse() {
        // doubling gaps on a line make average linkage build a caterpillar
        let n = 300;
        let x: Vec<f64> = (0..n).map(|i| 2f64.powi(i as i32 - n as i32)).collect();
        let dist = Array2::from_shape_fn((n, n), |(i, j)| (x[i] - x[j]).abs());
        let d = average_linkage(&AffinityMatrix::from_matrix(dist).unwrap()).unwrap();
        let t = build_hierarchy(&(0..n).collect::<Vec<_>>(), &d, &surfaces(n), 4).unwrap();
        assert_eq!(t.leaf_count(), n);
        assert!(t.depth() > n / 2);
    }
}
