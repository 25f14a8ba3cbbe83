//! DOT and CSV renderings of a taxonomy list.
//!
//! Node ids are `t{taxonomy}n{preorder index}`, shared by both formats.

use std::fmt::Write as _;

use super::{NodeKind, Taxonomy, TaxonomyNode};
use crate::Result;

/// Pre-order walk yielding (node id, parent id, node).
fn walk(ti: usize, root: &TaxonomyNode) -> Vec<(String, Option<String>, &TaxonomyNode)> {
    let mut out = Vec::new();
    let mut stack: Vec<(Option<String>, &TaxonomyNode)> = vec![(None, root)];
    while let Some((parent, node)) = stack.pop() {
        let id = format!("t{ti}n{}", out.len());
        for child in node.children.iter().rev() {
            stack.push((Some(id.clone()), child));
        }
        out.push((id, parent, node));
    }
    out
}

fn kind_str(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Root => "root",
        NodeKind::Internal => "internal",
        NodeKind::Leaf => "leaf",
    }
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' | '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

/// One `digraph` per taxonomy; inner nodes are boxes, leaves ellipses.
pub fn to_dot(list: &[Taxonomy]) -> String {
    let mut s = String::new();
    for (ti, t) in list.iter().enumerate() {
        let _ = writeln!(s, "digraph t{ti} {{");
        let _ = writeln!(s, "  label=\"{}\";", dot_escape(t.label()));
        for (id, parent, node) in walk(ti, &t.root) {
            let shape = if node.kind == NodeKind::Leaf { "ellipse" } else { "box" };
            let _ = writeln!(s, "  {id} [label=\"{}\", shape={shape}];", dot_escape(&node.label));
            if let Some(p) = parent {
                let _ = writeln!(s, "  {p} -> {id};");
            }
        }
        s.push_str("}\n");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvExport {
    pub nodes: String,
    pub edges: String,
}

/// `nodes.csv` (`node_id,label,kind,taxonomy_id`) and `edges.csv`
/// (`parent_id,child_id`).
pub fn to_csv(list: &[Taxonomy]) -> Result<CsvExport> {
    let mut nodes = csv::Writer::from_writer(Vec::new());
    let mut edges = csv::Writer::from_writer(Vec::new());
    nodes.write_record(["node_id", "label", "kind", "taxonomy_id"])?;
    edges.write_record(["parent_id", "child_id"])?;
    for (ti, t) in list.iter().enumerate() {
        let tid = format!("t{ti}");
        for (id, parent, node) in walk(ti, &t.root) {
            nodes.write_record([id.as_str(), &node.label, kind_str(node.kind), &tid])?;
            if let Some(p) = parent {
                edges.write_record([p.as_str(), id.as_str()])?;
            }
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| -> Result<String> {
        let bytes = w.into_inner().map_err(|e| crate::Error::invalid("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
    };
    Ok(CsvExport {
        nodes: finish(nodes)?,
        edges: finish(edges)?,
    })
}
