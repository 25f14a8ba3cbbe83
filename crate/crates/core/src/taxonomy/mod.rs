//! Per-cluster mini-taxonomies: construction, labelling, merging, statistics
//! and export.

mod export;
mod hierarchy;
mod label;
mod merge;
mod stats;

pub use export::{to_csv, to_dot, CsvExport};
pub use hierarchy::{build_hierarchy, DEFAULT_MIN_SUBTREE_SIZE};
pub use label::{
    clean_label, label_cluster, label_internal_nodes, parse_chat_response, stub_label, ChatLabeler, FewShot,
    LabelOutcome, Labeler, LabelerConfig, LabelerMode, StubLabeler,
};
pub use merge::{label_similarity, merge_taxonomies, MergeEvent, MergeOutcome, DEFAULT_SIGMA};
pub use stats::{coherence_score, taxonomy_stats, TaxonomyStats, TreeStats};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::io::{read_text, write_text};
use crate::{Error, Result};

/// Deepest nesting accepted when reading taxonomy JSON.
pub const MAX_JSON_DEPTH: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Root,
    Internal,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub label: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(default)]
    pub children: Vec<TaxonomyNode>,
}

impl TaxonomyNode {
    pub fn leaf(surface: &str) -> Self {
        Self {
            label: surface.to_string(),
            kind: NodeKind::Leaf,
            feature: Some(surface.to_string()),
            children: Vec::new(),
        }
    }

    /// Leaf feature surfaces in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match &node.feature {
                Some(f) if node.kind == NodeKind::Leaf => out.push(f.as_str()),
                _ => stack.extend(node.children.iter().rev()),
            }
        }
        out
    }

    pub fn leaf_count(&self) -> usize {
        if self.kind == NodeKind::Leaf {
            1
        } else {
            self.children.iter().map(Self::leaf_count).sum()
        }
    }

    /// Levels on the longest root-to-leaf path, counting this node as 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Self::depth).max().unwrap_or(0)
    }

    /// Structural checks: leaves carry a feature and no children, other
    /// nodes have children, labels are non-empty, only the top is a root.
    pub fn validate(&self) -> Result<()> {
        fn walk(node: &TaxonomyNode, top: bool) -> Result<()> {
            let err = |msg: &str| Err(Error::invalid("taxonomy", format!("{msg} (node {:?})", node.label)));
            if node.label.trim().is_empty() {
                return err("empty label");
            }
            match node.kind {
                NodeKind::Leaf if node.feature.is_none() || !node.children.is_empty() => {
                    return err("leaf needs a feature and no children")
                }
                NodeKind::Root | NodeKind::Internal if node.children.is_empty() || node.feature.is_some() => {
                    return err("inner node needs children and no feature")
                }
                NodeKind::Root if !top => return err("root below the top"),
                NodeKind::Internal | NodeKind::Leaf if top => return err("top node must be a root"),
                _ => {}
            }
            node.children.iter().try_for_each(|c| walk(c, false))
        }
        walk(self, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    /// Ids of the clusters whose features this taxonomy holds.
    pub provenance: Vec<usize>,
    pub root_label_embedding: Vec<f64>,
    pub root: TaxonomyNode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Taxonomy {
    pub fn label(&self) -> &str {
        &self.root.label
    }
}

fn max_nesting(text: &str) -> usize {
    let (mut depth, mut max, mut in_str, mut esc) = (0usize, 0usize, false, false);
    for b in text.bytes() {
        if in_str {
            match b {
                _ if esc => esc = false,
                b'\\' => esc = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'[' | b'{' => {
                depth += 1;
                max = max.max(depth);
            }
            b']' | b'}' => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    max
}

/// Parse a taxonomy list and validate every tree.
pub fn parse_taxonomies(text: &str) -> Result<Vec<Taxonomy>> {
    if max_nesting(text) > MAX_JSON_DEPTH {
        return Err(Error::invalid("taxonomy", format!("nesting deeper than {MAX_JSON_DEPTH}")));
    }
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let list: Vec<Taxonomy> = Deserialize::deserialize(&mut de)?;
    de.end()?;
    for t in &list {
        t.root.validate()?;
        if t.root_label_embedding.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("taxonomy", "non-finite label embedding"));
        }
    }
    Ok(list)
}

pub fn read_taxonomies(path: &Path) -> Result<Vec<Taxonomy>> {
    parse_taxonomies(&read_text(path)?)
}

pub fn write_taxonomies(path: &Path, list: &[Taxonomy]) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(list)?)
}
