//! Tree renderings: Graphviz DOT, JSON (importable) and an indented outline.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DiscourseGraph, Edge, Node, ROOT};
use crate::model::{
    Act, ActId, AttachmentEvent, Expectation, NodeId, Orientation, RepairNote, ThemeBox,
    ViolationRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Dot,
    Json,
    Text,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Dot => "dot",
            Format::Json => "json",
            Format::Text => "txt",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(Format::Dot),
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format `{other}` (expected dot, json or text)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Dot => "dot",
            Format::Json => "json",
            Format::Text => "text",
        })
    }
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent graph: {0}")]
    Invalid(String),
}

/// Serialized form of a [`DiscourseGraph`]. The root is implicit; `nodes`
/// holds the acts in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub dialogue_id: String,
    pub nodes: Vec<Act>,
    pub edges: Vec<Edge>,
    pub boxes: Vec<ThemeBox>,
    pub history: Vec<AttachmentEvent>,
    pub expectations: Vec<Expectation>,
    pub violations: Vec<ViolationRecord>,
    pub repair_notes: Vec<RepairNote>,
}

impl From<&DiscourseGraph> for GraphDocument {
    fn from(g: &DiscourseGraph) -> Self {
        GraphDocument {
            dialogue_id: g.dialogue_id.clone(),
            nodes: g.acts().cloned().collect(),
            edges: g.edges(),
            boxes: g.boxes.clone(),
            history: g.history.clone(),
            expectations: g.ledger.values().cloned().collect(),
            violations: g.violations.clone(),
            repair_notes: g.notes.clone(),
        }
    }
}

impl TryFrom<GraphDocument> for DiscourseGraph {
    type Error = ImportError;

    fn try_from(doc: GraphDocument) -> Result<Self, Self::Error> {
        let invalid = |m: String| ImportError::Invalid(m);
        if doc.edges.len() != doc.nodes.len() {
            return Err(invalid("one parent edge per act is required".into()));
        }
        let mut membership: HashMap<&ActId, usize> = HashMap::new();
        for (b, tb) in doc.boxes.iter().enumerate() {
            for m in &tb.members {
                if membership.insert(m, b).is_some() {
                    return Err(invalid(format!("{m} belongs to two theme boxes")));
                }
            }
        }

        let mut g = DiscourseGraph::new(doc.dialogue_id.clone());
        for (act, edge) in doc.nodes.iter().zip(&doc.edges) {
            if edge.node != act.id {
                return Err(invalid(format!("edge for {} listed against {}", edge.node, act.id)));
            }
            if g.index.contains_key(&act.id) {
                return Err(invalid(format!("duplicate node {}", act.id)));
            }
            let site = g
                .ix(&edge.site)
                .ok_or_else(|| invalid(format!("{} hangs from unknown site {}", act.id, edge.site)))?;
            let up = if edge.relation.orientation() == Orientation::Subordinating || site == ROOT {
                Some(site)
            } else {
                g.nodes[site].up
            };
            let box_ix = membership.get(&act.id).copied();
            g.index.insert(act.id.clone(), g.nodes.len());
            g.nodes.push(Node {
                act: Some(act.clone()),
                parent: Some((site, edge.relation)),
                up,
                box_ix,
            });
        }
        g.boxes = doc.boxes;
        g.history = doc.history;
        g.ledger = doc
            .expectations
            .into_iter()
            .map(|e| (e.node.clone(), e))
            .collect();
        g.violations = doc.violations;
        g.notes = doc.repair_notes;
        g.validate().map_err(invalid)?;
        Ok(g)
    }
}

pub fn to_json(graph: &DiscourseGraph) -> String {
    serde_json::to_string_pretty(&GraphDocument::from(graph)).expect("graph serializes")
}

pub fn from_json(input: &[u8]) -> Result<DiscourseGraph, ImportError> {
    let doc: GraphDocument = serde_json::from_slice(input)?;
    DiscourseGraph::try_from(doc)
}

pub fn export_tree(graph: &DiscourseGraph, format: Format) -> String {
    match format {
        Format::Dot => to_dot(graph),
        Format::Json => to_json(graph),
        Format::Text => to_outline(graph),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Subordinating edges run top to bottom; a coordinating edge puts both ends
/// on the same rank. Theme boxes become dashed clusters and off-frontier
/// attachments are drawn in red.
pub fn to_dot(graph: &DiscourseGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(graph.dialogue_id()));
    out.push_str("  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n");
    let _ = writeln!(out, "  {} [shape=circle, label=\"\"];", quote(NodeId::ROOT_LABEL));
    for tb in graph.theme_boxes() {
        let _ = writeln!(out, "  subgraph \"cluster_box{}\" {{", tb.box_id);
        out.push_str("    style=dashed;\n");
        let _ = writeln!(out, "    label={};", quote(tb.theme.label()));
        for m in &tb.members {
            let act = graph.act(m).expect("box member exists");
            let _ = writeln!(
                out,
                "    {} [tooltip={}];",
                quote(&m.to_string()),
                quote(&act.text)
            );
        }
        out.push_str("  }\n");
    }
    let ruptures: Vec<&ActId> = graph
        .history()
        .iter()
        .filter(|e| !e.on_frontier && e.realized_site == e.requested_site)
        .map(|e| &e.new_node)
        .collect();
    for edge in graph.edges() {
        let site = quote(&edge.site.to_string());
        let node = quote(&edge.node.to_string());
        let mut attrs = format!("label={}", quote(edge.relation.name()));
        if ruptures.contains(&&edge.node) {
            attrs.push_str(", color=red");
        }
        if edge.relation.is_subordinating() {
            let _ = writeln!(out, "  {site} -> {node} [{attrs}];");
        } else {
            let _ = writeln!(out, "  {site} -> {node} [{attrs}, style=bold];");
            let _ = writeln!(out, "  {{ rank=same; {site}; {node}; }}");
        }
    }
    out.push_str("}\n");
    out
}

/// Indented outline, one node per line: `id <relation> [theme] text`.
pub fn to_outline(graph: &DiscourseGraph) -> String {
    let mut out = String::from("ROOT\n");
    let mut stack: Vec<(ActId, usize)> = graph
        .children(&NodeId::Root)
        .into_iter()
        .rev()
        .map(|(id, _)| (id, 1))
        .collect();
    let off_frontier: Vec<&ActId> = graph
        .history()
        .iter()
        .filter(|e| !e.on_frontier)
        .map(|e| &e.new_node)
        .collect();
    while let Some((id, depth)) = stack.pop() {
        let act = graph.act(&id).expect("child exists");
        let (_, relation) = graph.parent(&id).expect("non-root has parent");
        let _ = write!(
            out,
            "{}{} <{}> [{}] {}",
            "  ".repeat(depth),
            id,
            relation,
            act.theme,
            act.text
        );
        if off_frontier.contains(&&id) {
            out.push_str("  (off-frontier request)");
        }
        out.push('\n');
        let node = NodeId::Act(id);
        for (child, _) in graph.children(&node).into_iter().rev() {
            stack.push((child, depth + 1));
        }
    }
    out
}
