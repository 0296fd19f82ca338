//! The rooted discourse tree and its bookkeeping (theme boxes, attachment
//! history, expectation ledger). Mutation happens only through the
//! attachment engine; a finished graph is an immutable snapshot.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{
    Act, ActId, AttachmentEvent, Expectation, NodeId, Relation, RepairNote, Theme, ThemeBox,
    ViolationRecord,
};

/// Index of the root in `DiscourseGraph::nodes`.
pub(crate) const ROOT: usize = 0;

/// Parent edge of a non-root node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub site: NodeId,
    pub node: ActId,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub act: Option<Act>,
    /// (parent index, relation); `None` only for the root.
    pub parent: Option<(usize, Relation)>,
    /// Next node up the right frontier if this node were the last attached.
    pub up: Option<usize>,
    pub box_ix: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscourseGraph {
    pub(crate) dialogue_id: String,
    pub(crate) nodes: Vec<Node>,
    pub(crate) index: HashMap<ActId, usize>,
    pub(crate) boxes: Vec<ThemeBox>,
    pub(crate) history: Vec<AttachmentEvent>,
    pub(crate) ledger: BTreeMap<ActId, Expectation>,
    pub(crate) violations: Vec<ViolationRecord>,
    pub(crate) notes: Vec<RepairNote>,
}

impl DiscourseGraph {
    /// A graph holding only the root.
    pub fn new(dialogue_id: impl Into<String>) -> Self {
        DiscourseGraph {
            dialogue_id: dialogue_id.into(),
            nodes: vec![Node {
                act: None,
                parent: None,
                up: None,
                box_ix: None,
            }],
            index: HashMap::new(),
            boxes: Vec::new(),
            history: Vec::new(),
            ledger: BTreeMap::new(),
            violations: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn dialogue_id(&self) -> &str {
        &self.dialogue_id
    }

    /// Root included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.parent.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Acts in document order.
    pub fn acts(&self) -> impl Iterator<Item = &Act> + '_ {
        self.nodes.iter().filter_map(|n| n.act.as_ref())
    }

    pub fn act(&self, id: &ActId) -> Option<&Act> {
        self.index.get(id).and_then(|&ix| self.nodes[ix].act.as_ref())
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.ix(node).is_some()
    }

    /// The most recently attached node, or the root of an empty graph.
    pub fn last_node(&self) -> NodeId {
        self.id_of(self.nodes.len() - 1)
    }

    pub fn parent(&self, id: &ActId) -> Option<(NodeId, Relation)> {
        let ix = *self.index.get(id)?;
        self.nodes[ix].parent.map(|(p, rel)| (self.id_of(p), rel))
    }

    /// Edges in attachment order.
    pub fn edges(&self) -> Vec<Edge> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(ix, n)| {
                n.parent.map(|(p, relation)| Edge {
                    site: self.id_of(p),
                    node: self.nodes[ix].act.as_ref().expect("non-root").id.clone(),
                    relation,
                })
            })
            .collect()
    }

    /// Children of `node`, in attachment order.
    pub fn children(&self, node: &NodeId) -> Vec<(ActId, Relation)> {
        let Some(target) = self.ix(node) else {
            return Vec::new();
        };
        self.nodes
            .iter()
            .filter_map(|n| match (n.parent, &n.act) {
                (Some((p, rel)), Some(act)) if p == target => Some((act.id.clone(), rel)),
                _ => None,
            })
            .collect()
    }

    /// Number of edges between `node` and the root.
    pub fn depth(&self, node: &NodeId) -> Option<usize> {
        let mut ix = self.ix(node)?;
        let mut depth = 0;
        while let Some((p, _)) = self.nodes[ix].parent {
            ix = p;
            depth += 1;
        }
        Some(depth)
    }

    pub fn theme_boxes(&self) -> &[ThemeBox] {
        &self.boxes
    }

    pub fn box_of(&self, id: &ActId) -> Option<&ThemeBox> {
        let ix = *self.index.get(id)?;
        self.nodes[ix].box_ix.map(|b| &self.boxes[b])
    }

    /// Theme of a node; the root has none.
    pub fn theme_of(&self, node: &NodeId) -> Option<&Theme> {
        let ix = self.ix(node)?;
        self.nodes[ix].act.as_ref().map(|a| &a.theme)
    }

    pub fn history(&self) -> &[AttachmentEvent] {
        &self.history
    }

    /// Expectation ledger, keyed by the opening node, in document order.
    pub fn expectations(&self) -> impl Iterator<Item = &Expectation> + '_ {
        self.ledger.values()
    }

    pub fn expectation(&self, id: &ActId) -> Option<&Expectation> {
        self.ledger.get(id)
    }

    pub fn violations(&self) -> &[ViolationRecord] {
        &self.violations
    }

    pub fn repair_notes(&self) -> &[RepairNote] {
        &self.notes
    }

    /// Checks the structural invariants: a tree rooted at the root, acts in
    /// document order, one theme-consistent box per act. Returns the first
    /// problem found.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes[ROOT].act.is_some() || self.nodes[ROOT].parent.is_some() {
            return Err("root must carry no act and no parent".into());
        }
        for (ix, node) in self.nodes.iter().enumerate().skip(1) {
            let act = node.act.as_ref().ok_or("non-root node without act")?;
            match node.parent {
                Some((p, _)) if p < ix => {}
                _ => return Err(format!("{} lacks a parent attached before it", act.id)),
            }
            if ix > 1 {
                let prev = &self.nodes[ix - 1].act.as_ref().expect("non-root").id;
                if prev >= &act.id {
                    return Err(format!("{} is out of document order", act.id));
                }
            }
            let b = node.box_ix.ok_or_else(|| format!("{} has no theme box", act.id))?;
            let tb = &self.boxes[b];
            if !tb.theme.matches(&act.theme) || !tb.members.contains(&act.id) {
                return Err(format!("{} is not consistently boxed", act.id));
            }
        }
        let members: usize = self.boxes.iter().map(|b| b.members.len()).sum();
        if members != self.nodes.len() - 1 {
            return Err("every act must belong to exactly one theme box".into());
        }
        if self.edge_count() + 1 != self.node_count() {
            return Err("edge count must be node count minus one".into());
        }
        let order: Vec<&ActId> = self.acts().map(|a| &a.id).collect();
        let events: Vec<&ActId> = self.history.iter().map(|e| &e.new_node).collect();
        if order != events {
            return Err("attachment history must follow document order".into());
        }
        Ok(())
    }

    pub(crate) fn ix(&self, node: &NodeId) -> Option<usize> {
        match node {
            NodeId::Root => Some(ROOT),
            NodeId::Act(id) => self.index.get(id).copied(),
        }
    }

    pub(crate) fn id_of(&self, ix: usize) -> NodeId {
        match &self.nodes[ix].act {
            None => NodeId::Root,
            Some(act) => NodeId::Act(act.id.clone()),
        }
    }
}
