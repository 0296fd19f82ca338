//! Right frontier, site resolution and attachment in strict, charity and
//! repair modes.
//!
//! The frontier is the last attached node followed by each ancestor whose
//! edge toward it is subordinating; the root is always included. A
//! coordinating edge removes its site (and everything left of it) from the
//! frontier. Each node caches the next frontier node above it, so the
//! frontier of any node is a walk over those links.

use std::fmt;

use thiserror::Error;

use crate::graph::{DiscourseGraph, Node, ROOT};
use crate::model::{
    Act, ActId, AttachmentEvent, BoxStatus, Expectation, ExpectationStatus, Mode, NodeId,
    Relation, RepairNote, ThemeBox, ViolationKind, ViolationRecord, Role,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttachError {
    #[error("{act}: site {site} is not on the right frontier [{frontier}]")]
    OffFrontier {
        act: ActId,
        site: NodeId,
        frontier: Frontier,
    },
    #[error("{act}: unknown attachment site {site}")]
    UnknownSite { act: ActId, site: NodeId },
    #[error("act {0} is already in the graph")]
    DuplicateAct(ActId),
    #[error("act {act} arrives after {last}, out of document order")]
    OutOfOrder { act: ActId, last: ActId },
    #[error("{act}: site {site} is not strictly above the last node on the frontier")]
    NotAnAscent { act: ActId, site: NodeId },
}

/// Attachment-eligible nodes, ordered from the most recent node up to the
/// root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frontier(Vec<NodeId>);

impl Frontier {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.0.contains(node)
    }

    pub fn position(&self, node: &NodeId) -> Option<usize> {
        self.0.iter().position(|n| n == node)
    }

    /// Most recent node (the root for an empty graph).
    pub fn lowest(&self) -> &NodeId {
        &self.0[0]
    }

    pub fn into_vec(self) -> Vec<NodeId> {
        self.0
    }
}

impl fmt::Display for Frontier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

/// Result of one successful attachment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachOutcome {
    pub realized_site: NodeId,
    pub violation: Option<ViolationRecord>,
    pub note: Option<RepairNote>,
}

pub fn right_frontier(graph: &DiscourseGraph) -> Frontier {
    Frontier(
        frontier_ixs(graph, graph.nodes.len() - 1)
            .into_iter()
            .map(|ix| graph.id_of(ix))
            .collect(),
    )
}

fn frontier_ixs(graph: &DiscourseGraph, from: usize) -> Vec<usize> {
    let mut out = vec![from];
    let mut cur = from;
    while let Some(next) = graph.nodes[cur].up {
        out.push(next);
        cur = next;
    }
    out
}

/// Default site for an act without an explicit annotation. Never proposes
/// an off-frontier node.
pub fn resolve_site(graph: &DiscourseGraph, act: &Act, relation: Relation) -> NodeId {
    let frontier = frontier_ixs(graph, graph.nodes.len() - 1);
    let non_root = || frontier.iter().copied().filter(|&ix| ix != ROOT);

    let themed = non_root().find(|&ix| {
        graph.nodes[ix]
            .act
            .as_ref()
            .is_some_and(|a| a.theme.matches(&act.theme))
    });
    if let Some(ix) = themed {
        return graph.id_of(ix);
    }

    if relation.is_closer() {
        // an open expectation waiting for exactly this closer, else the
        // highest non-root frontier node
        let waiting = non_root().find(|&ix| {
            let id = &graph.nodes[ix].act.as_ref().expect("non-root").id;
            graph.ledger.get(id).is_some_and(|e| {
                e.is_open() && e.opened_by.expected_closer() == Ok(Some(relation))
            })
        });
        if let Some(ix) = waiting.or_else(|| non_root().next_back()) {
            return graph.id_of(ix);
        }
    } else if !relation.is_subordinating() {
        return graph.id_of(frontier[0]);
    }
    NodeId::Root
}

impl DiscourseGraph {
    pub fn right_frontier(&self) -> Frontier {
        right_frontier(self)
    }

    pub fn resolve_site(&self, act: &Act, relation: Relation) -> NodeId {
        resolve_site(self, act, relation)
    }

    /// Attaches `act` under `site`.
    ///
    /// Strict mode rejects off-frontier sites. Charity mode keeps the
    /// requested site and records a right-frontier rupture. Repair mode
    /// moves the act to the lowest frontier node sharing its theme (or the
    /// lowest frontier node when none does) and records a [`RepairNote`].
    /// Any on-frontier attachment above the last node is an ascent and is
    /// checked for open expectations left below it.
    pub fn attach(
        &mut self,
        act: Act,
        site: NodeId,
        relation: Relation,
        mode: Mode,
    ) -> Result<AttachOutcome, AttachError> {
        if self.index.contains_key(&act.id) {
            return Err(AttachError::DuplicateAct(act.id));
        }
        if let NodeId::Act(last) = self.last_node() {
            if last >= act.id {
                return Err(AttachError::OutOfOrder { act: act.id, last });
            }
        }
        let Some(requested_ix) = self.ix(&site) else {
            return Err(AttachError::UnknownSite { act: act.id, site });
        };

        let last_ix = self.nodes.len() - 1;
        let frontier = frontier_ixs(self, last_ix);
        let on_frontier = frontier.contains(&requested_ix);

        let mut violation = None;
        let mut note = None;
        let site_ix = if on_frontier {
            requested_ix
        } else {
            match mode {
                Mode::Strict => {
                    return Err(AttachError::OffFrontier {
                        act: act.id,
                        site,
                        frontier: self.right_frontier(),
                    })
                }
                Mode::Charity => {
                    violation = Some(ViolationRecord::new(
                        ViolationKind::RightFrontierRupture,
                        act.id.clone(),
                        site.clone(),
                        Vec::new(),
                    ));
                    requested_ix
                }
                Mode::Repair => {
                    let forced = self.repair_target(&frontier, &act);
                    let site_theme = self.nodes[forced].act.as_ref().map(|a| a.theme.clone());
                    note = Some(RepairNote {
                        trigger_node: act.id.clone(),
                        requested_site: site.clone(),
                        realized_site: self.id_of(forced),
                        semantic_inconsistency: !site_theme
                            .as_ref()
                            .is_some_and(|t| t.matches(&act.theme)),
                        act_theme: act.theme.clone(),
                        site_theme,
                    });
                    forced
                }
            }
        };

        let realized_on_frontier = frontier.contains(&site_ix);
        if realized_on_frontier && site_ix != last_ix {
            violation = self.ascent_violation(&frontier, site_ix, &act, relation);
        }

        let event = AttachmentEvent {
            new_node: act.id.clone(),
            requested_site: site,
            realized_site: self.id_of(site_ix),
            relation,
            frontier_snapshot: frontier.iter().map(|&ix| self.id_of(ix)).collect(),
            on_frontier,
            mode,
        };
        self.insert(act, site_ix, relation, mode);
        self.history.push(event);
        if let Some(v) = &violation {
            self.violations.push(v.clone());
        }
        if let Some(n) = &note {
            self.notes.push(n.clone());
        }
        Ok(AttachOutcome {
            realized_site: self.id_of(site_ix),
            violation,
            note,
        })
    }

    /// Attachment that must climb: `site` has to be on the frontier strictly
    /// above the last node. Otherwise behaves as [`attach`](Self::attach).
    pub fn ascend(
        &mut self,
        act: Act,
        site: NodeId,
        relation: Relation,
        mode: Mode,
    ) -> Result<AttachOutcome, AttachError> {
        let frontier = self.right_frontier();
        match frontier.position(&site) {
            Some(pos) if pos > 0 => self.attach(act, site, relation, mode),
            _ => Err(AttachError::NotAnAscent { act: act.id, site }),
        }
    }

    /// Lowest frontier node whose theme matches, else the lowest node.
    fn repair_target(&self, frontier: &[usize], act: &Act) -> usize {
        frontier
            .iter()
            .copied()
            .find(|&ix| {
                self.nodes[ix]
                    .act
                    .as_ref()
                    .is_some_and(|a| a.theme.matches(&act.theme))
            })
            .unwrap_or(frontier[0])
    }

    /// Open expectations on the frontier strictly below `site_ix` make the
    /// climb a violation, unless the interviewer opens a new exchange part
    /// with an expectation of their own.
    fn ascent_violation(
        &self,
        frontier: &[usize],
        site_ix: usize,
        act: &Act,
        relation: Relation,
    ) -> Option<ViolationRecord> {
        if act.role == Role::Interviewer && relation.opens_expectation() {
            return None;
        }
        let pos = frontier.iter().position(|&ix| ix == site_ix)?;
        let mut open: Vec<ActId> = frontier[..pos]
            .iter()
            .filter_map(|&ix| self.nodes[ix].act.as_ref())
            .filter(|a| self.ledger.get(&a.id).is_some_and(Expectation::is_open))
            .map(|a| a.id.clone())
            .collect();
        if open.is_empty() {
            return None;
        }
        open.sort();
        Some(ViolationRecord::new(
            ViolationKind::AscentWithoutClosure,
            act.id.clone(),
            self.id_of(site_ix),
            open,
        ))
    }

    fn insert(&mut self, act: Act, site_ix: usize, relation: Relation, mode: Mode) {
        let up = if relation.is_subordinating() || site_ix == ROOT {
            Some(site_ix)
        } else {
            self.nodes[site_ix].up
        };

        if let Some(site_act) = &self.nodes[site_ix].act {
            if let Some(entry) = self.ledger.get_mut(&site_act.id) {
                if entry.is_open() && entry.opened_by.expected_closer() == Ok(Some(relation)) {
                    entry.status = ExpectationStatus::Closed;
                    entry.closed_by = Some(act.id.clone());
                }
            }
        }
        if relation.opens_expectation() {
            self.ledger.insert(
                act.id.clone(),
                Expectation {
                    node: act.id.clone(),
                    opened_by: relation,
                    status: ExpectationStatus::Open,
                    closed_by: None,
                },
            );
        }

        let box_ix = self.choose_box(&act, site_ix, mode);
        let ix = self.nodes.len();
        self.index.insert(act.id.clone(), ix);
        self.nodes.push(Node {
            act: Some(act),
            parent: Some((site_ix, relation)),
            up,
            box_ix: Some(box_ix),
        });
    }

    /// Joins the site's box or the current box when the theme matches; in
    /// charity mode an earlier box of the same theme is re-opened; otherwise
    /// a fresh box opens. Leaving the current box closes it.
    fn choose_box(&mut self, act: &Act, site_ix: usize, mode: Mode) -> usize {
        let current = self.nodes[self.nodes.len() - 1].box_ix;
        let fits = |b: &Option<usize>, boxes: &[ThemeBox]| {
            b.filter(|&b| boxes[b].theme.matches(&act.theme))
        };
        let target = fits(&self.nodes[site_ix].box_ix, &self.boxes)
            .or_else(|| fits(&current, &self.boxes))
            .or_else(|| {
                if mode == Mode::Charity {
                    self.boxes.iter().rposition(|b| b.theme.matches(&act.theme))
                } else {
                    None
                }
            })
            .unwrap_or_else(|| {
                self.boxes.push(ThemeBox {
                    box_id: self.boxes.len() + 1,
                    theme: act.theme.clone(),
                    members: Vec::new(),
                    status: BoxStatus::Open,
                });
                self.boxes.len() - 1
            });
        if let Some(cur) = current {
            if cur != target {
                self.boxes[cur].status = BoxStatus::Closed;
            }
        }
        let tb = &mut self.boxes[target];
        tb.status = BoxStatus::Open;
        tb.members.push(act.id.clone());
        target
    }
}
