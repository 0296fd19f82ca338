//! Dual-view analysis of a transcript: the charity view keeps the
//! theme-faithful sites and collects violations, the repair view forces
//! frontier attachments and collects repair notes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::AttachError;
use crate::export::GraphDocument;
use crate::graph::DiscourseGraph;
use crate::model::{
    Act, ConstituentRank, Mode, NodeId, Relation, RepairNote, ViolationKind, ViolationRecord,
};
use crate::transcript::{
    Discontinuity, Medication, Population, SequenceRecord, TranscriptDocument,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("{mode} view of `{dialogue}`: {source}")]
    Attach {
        dialogue: String,
        mode: Mode,
        #[source]
        source: Box<AttachError>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub right_frontier_ruptures: usize,
    pub ascents_without_closure: usize,
    pub decisive: usize,
    pub non_decisive: usize,
    pub repair_notes: usize,
}

impl Summary {
    fn of(violations: &[ViolationRecord], notes: &[RepairNote]) -> Self {
        let count = |k| violations.iter().filter(|v| v.kind == k).count();
        let decisive = violations.iter().filter(|v| v.decisive).count();
        Summary {
            right_frontier_ruptures: count(ViolationKind::RightFrontierRupture),
            ascents_without_closure: count(ViolationKind::AscentWithoutClosure),
            decisive,
            non_decisive: violations.len() - decisive,
            repair_notes: notes.len(),
        }
    }

    pub fn total_violations(&self) -> usize {
        self.right_frontier_ruptures + self.ascents_without_closure
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub dialogue_id: String,
    pub population: Option<Population>,
    pub medication: Option<Medication>,
    pub charity_view: DiscourseGraph,
    pub repair_view: DiscourseGraph,
    /// Classified violations of the charity view.
    pub violations: Vec<ViolationRecord>,
    /// Notes of the repair view.
    pub repair_notes: Vec<RepairNote>,
    pub summary: Summary,
}

/// JSON shape of a report.
#[derive(Serialize)]
struct ReportDocument<'a> {
    dialogue_id: &'a str,
    population: Option<Population>,
    medication: Option<Medication>,
    summary: &'a Summary,
    violations: &'a [ViolationRecord],
    repair_notes: &'a [RepairNote],
    charity_view: GraphDocument,
    repair_view: GraphDocument,
}

impl AnalysisReport {
    pub fn has_violations(&self) -> bool {
        !self.violations.is_empty()
    }

    pub fn discontinuity(&self) -> Discontinuity {
        if self.violations.iter().any(|v| v.decisive) {
            Discontinuity::Decisive
        } else if self.has_violations() {
            Discontinuity::NonDecisive
        } else {
            Discontinuity::None
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(ReportDocument {
            dialogue_id: &self.dialogue_id,
            population: self.population,
            medication: self.medication,
            summary: &self.summary,
            violations: &self.violations,
            repair_notes: &self.repair_notes,
            charity_view: GraphDocument::from(&self.charity_view),
            repair_view: GraphDocument::from(&self.repair_view),
        })
        .expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("report serializes")
    }

    /// One line per violation and per repair note, then the totals.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "dialogue {} ({} acts; charity boxes {}, repair boxes {})\n",
            self.dialogue_id,
            self.charity_view.node_count() - 1,
            self.charity_view.theme_boxes().len(),
            self.repair_view.theme_boxes().len()
        );
        for v in &self.violations {
            let _ = write!(
                out,
                "  {} trigger={} site={} decisive={} rank={} span={}",
                v.kind,
                v.trigger_node,
                v.site_node,
                v.decisive,
                v.constituent_rank.as_str(),
                v.turn_span
            );
            if !v.open_nodes.is_empty() {
                let open: Vec<String> = v.open_nodes.iter().map(ToString::to_string).collect();
                let _ = write!(out, " open={}", open.join(","));
            }
            out.push('\n');
        }
        for n in &self.repair_notes {
            let _ = write!(
                out,
                "  repair trigger={} requested={} realized={}",
                n.trigger_node, n.requested_site, n.realized_site
            );
            if n.semantic_inconsistency {
                let site_theme = n.site_theme.as_ref().map_or("-", |t| t.label());
                let _ = write!(out, " inconsistency={}/{}", n.act_theme, site_theme);
            }
            out.push('\n');
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "  summary RightFrontierRupture={} AscentWithoutClosure={} decisive={} non-decisive={} repair-notes={}",
            s.right_frontier_ruptures, s.ascents_without_closure, s.decisive, s.non_decisive, s.repair_notes
        );
        out
    }
}

/// Relation used for an act without annotation: the closer of the most
/// recent open expectation on the frontier raised by another speaker,
/// else Elaboration.
fn default_relation(graph: &DiscourseGraph, act: &Act) -> Relation {
    graph
        .right_frontier()
        .nodes()
        .iter()
        .filter_map(NodeId::act)
        .filter_map(|id| graph.expectation(id).map(|e| (id, e)))
        .find(|(id, e)| {
            e.is_open() && graph.act(id).is_some_and(|a| a.speaker != act.speaker)
        })
        .and_then(|(_, e)| e.opened_by.expected_closer().ok().flatten())
        .unwrap_or(Relation::Elaboration)
}

/// Builds one view of the document act by act.
pub fn build_view(doc: &TranscriptDocument, mode: Mode) -> Result<DiscourseGraph, AnalysisError> {
    let mut graph = DiscourseGraph::new(doc.dialogue_id.clone());
    for (act, annotation) in doc.acts() {
        let relation = annotation.map_or_else(|| default_relation(&graph, &act), |a| a.relation);
        let site = annotation.map_or_else(|| graph.resolve_site(&act, relation), |a| a.site.clone());
        graph
            .attach(act, site, relation, mode)
            .map_err(|source| AnalysisError::Attach {
                dialogue: doc.dialogue_id.clone(),
                mode,
                source: Box::new(source),
            })?;
    }
    Ok(graph)
}

pub fn analyze(doc: &TranscriptDocument) -> Result<AnalysisReport, AnalysisError> {
    let charity_view = build_view(doc, Mode::Charity)?;
    let repair_view = build_view(doc, Mode::Repair)?;
    let violations: Vec<ViolationRecord> = charity_view
        .violations()
        .iter()
        .map(|v| classify_decisive(v, &charity_view))
        .collect();
    let repair_notes = repair_view.repair_notes().to_vec();
    let summary = Summary::of(&violations, &repair_notes);
    Ok(AnalysisReport {
        dialogue_id: doc.dialogue_id.clone(),
        population: doc.population,
        medication: doc.medication,
        charity_view,
        repair_view,
        violations,
        repair_notes,
        summary,
    })
}

/// Sets rank, transaction span and the decisive flag.
///
/// The transaction is the run of consecutive acts sharing the theme box of
/// the act just before the trigger, preceded by the act that opened it and
/// closed by the trigger. A violation is decisive when that transaction
/// covers at least three turns and three constituents are implicated. When
/// the trigger is the third (or later) act of its turn the constituents are
/// acts of that turn; otherwise they are the turns of the site, the anchor
/// (the preceding act for a rupture, the most recent open node for an
/// ascent) and the trigger.
pub fn classify_decisive(v: &ViolationRecord, graph: &DiscourseGraph) -> ViolationRecord {
    let acts: Vec<&Act> = graph.acts().collect();
    let mut out = v.clone();
    let Some(t) = acts.iter().position(|a| a.id == v.trigger_node) else {
        out.decisive = false;
        out.turn_span = 0;
        return out;
    };

    let mut turns = BTreeSet::from([acts[t].turn()]);
    if t > 0 {
        let box_of = |i: usize| graph.box_of(&acts[i].id).map(|b| b.box_id);
        let pred_box = box_of(t - 1);
        let mut start = t - 1;
        while start > 0 && box_of(start - 1) == pred_box {
            start -= 1;
        }
        let first = start.saturating_sub(1);
        turns.extend(acts[first..t].iter().map(|a| a.turn()));
    }
    out.turn_span = turns.len();

    let trigger = &v.trigger_node;
    let constituents = if trigger.sub_index() >= 3 {
        out.constituent_rank = ConstituentRank::Act;
        3
    } else {
        out.constituent_rank = ConstituentRank::Intervention;
        let anchor = match v.kind {
            ViolationKind::RightFrontierRupture => t.checked_sub(1).map(|p| &acts[p].id),
            ViolationKind::AscentWithoutClosure => v.open_nodes.last(),
        };
        let mut implicated = BTreeSet::from([trigger.turn()]);
        implicated.extend(v.site_node.act().map(|a| a.turn()));
        implicated.extend(anchor.map(|a| a.turn()));
        implicated.len()
    };
    out.decisive = out.turn_span >= 3 && constituents >= 3;
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub dialogues: usize,
    pub by_kind: BTreeMap<ViolationKind, usize>,
    pub decisive: usize,
    pub non_decisive: usize,
    /// One record per report that declares its population.
    pub records: Vec<SequenceRecord>,
}

pub fn corpus_summary(reports: &[AnalysisReport]) -> CorpusSummary {
    let mut summary = CorpusSummary {
        dialogues: reports.len(),
        by_kind: BTreeMap::from([
            (ViolationKind::RightFrontierRupture, 0),
            (ViolationKind::AscentWithoutClosure, 0),
        ]),
        ..CorpusSummary::default()
    };
    for r in reports {
        for v in &r.violations {
            *summary.by_kind.entry(v.kind).or_default() += 1;
        }
        summary.decisive += r.summary.decisive;
        summary.non_decisive += r.summary.non_decisive;
        if let Some(population) = r.population {
            summary.records.push(SequenceRecord {
                sequence_id: r.dialogue_id.clone(),
                population,
                medication: r.medication.unwrap_or(Medication::None),
                discontinuity: r.discontinuity(),
            });
        }
    }
    summary
}
