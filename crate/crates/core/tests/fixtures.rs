use sdrs_core::analysis::{analyze, build_view, corpus_summary};
use sdrs_core::export::{export_tree, from_json, Format};
use sdrs_core::model::{ActId, BoxStatus, ConstituentRank, Mode, NodeId, ViolationKind};
use sdrs_core::stats::{table2, table3};
use sdrs_core::transcript::{load_sequence_records, parse_transcript, Population, TranscriptDocument};
use sdrs_core::AttachError;

const EXTRACT_1: &str = include_str!("../fixtures/transcripts/extract1.dlg");
const EXTRACT_2: &str = include_str!("../fixtures/transcripts/extract2.dlg");
const CONTROL: &str = include_str!("../fixtures/transcripts/control.dlg");
const PAPER_COUNTS: &str = include_str!("../fixtures/paper_counts.csv");

fn doc(src: &str) -> TranscriptDocument {
    parse_transcript(src.as_bytes()).unwrap()
}

fn id(s: &str) -> ActId {
    s.parse().unwrap()
}

fn node(s: &str) -> NodeId {
    s.parse().unwrap()
}

#[test]
fn extract1_two_frontier_ruptures() {
    let report = analyze(&doc(EXTRACT_1)).unwrap();
    let found: Vec<(ViolationKind, String, String)> = report
        .violations
        .iter()
        .map(|v| (v.kind, v.trigger_node.to_string(), v.site_node.to_string()))
        .collect();
    assert_eq!(
        found,
        vec![
            (ViolationKind::RightFrontierRupture, "B130.1".into(), "A125.1".into()),
            (ViolationKind::RightFrontierRupture, "B132.3".into(), "B128.1".into()),
        ]
    );
    // B132.3 lands in the second theme box
    let site_box = report.charity_view.box_of(&id("B128.1")).unwrap();
    assert_eq!(site_box.box_id, 2);
    assert_eq!(report.summary.ascents_without_closure, 0);
}

#[test]
fn extract1_first_prosody_mark_is_a_rise() {
    let d = doc(EXTRACT_1);
    assert_eq!(
        d.turns[0].acts[0].prosody.first(),
        Some(&sdrs_core::model::Prosody::Rise)
    );
}

#[test]
fn extract1_classification() {
    let report = analyze(&doc(EXTRACT_1)).unwrap();
    let b130 = &report.violations[0];
    assert!(b130.decisive);
    assert_eq!(b130.constituent_rank, ConstituentRank::Intervention);
    assert_eq!(b130.turn_span, 6);
    let b132 = &report.violations[1];
    assert_eq!(b132.constituent_rank, ConstituentRank::Act);
    assert!(b132.decisive);
    assert_eq!(b132.turn_span, 4);
}

#[test]
fn extract1_strict_rejects_b130() {
    let err = build_view(&doc(EXTRACT_1), Mode::Strict).unwrap_err();
    let sdrs_core::analysis::AnalysisError::Attach { source, .. } = err;
    match *source {
        AttachError::OffFrontier { act, site, frontier } => {
            assert_eq!(act, id("B130.1"));
            assert_eq!(site, node("A125.1"));
            let nodes: Vec<String> = frontier.nodes().iter().map(ToString::to_string).collect();
            assert_eq!(nodes, ["A129.1", "B128.1", "B126.1", "ROOT"]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn extract1_repair_moves_b130_onto_frontier() {
    let report = analyze(&doc(EXTRACT_1)).unwrap();
    let note = &report.repair_notes[0];
    assert_eq!(note.trigger_node, id("B130.1"));
    assert_eq!(note.requested_site, node("A125.1"));
    assert_eq!(note.realized_site, node("A129.1"));
    assert!(note.semantic_inconsistency);
    // in the repaired tree B128 stays reachable, so B132.3 needs no repair
    assert_eq!(report.repair_notes.len(), 1);
    assert!(report
        .repair_view
        .history()
        .iter()
        .all(|e| e.frontier_snapshot.contains(&e.realized_site)));
}

#[test]
fn extract1_boxes() {
    let g = build_view(&doc(EXTRACT_1), Mode::Charity).unwrap();
    let boxes = g.theme_boxes();
    assert_eq!(boxes.len(), 2);
    assert_eq!(boxes[0].theme.label(), "politique");
    assert_eq!(boxes[1].theme.label(), "mort");
    assert_eq!(boxes[1].members.last(), Some(&id("B132.3")));
    assert_eq!(boxes[1].status, BoxStatus::Open);
    assert_eq!(boxes[0].status, BoxStatus::Closed);
    let dot = export_tree(&g, Format::Dot);
    assert_eq!(dot.matches("subgraph \"cluster_box").count(), 2);
    assert_eq!(dot.matches("style=dashed").count(), 2);
}

#[test]
fn extract2_single_unclosed_ascent() {
    let report = analyze(&doc(EXTRACT_2)).unwrap();
    assert_eq!(report.violations.len(), 1);
    let v = &report.violations[0];
    assert_eq!(v.kind, ViolationKind::AscentWithoutClosure);
    assert_eq!(v.trigger_node, id("G88.1"));
    assert_eq!(v.site_node, node("G82.1"));
    assert_eq!(v.open_nodes, vec![id("V87.1")]);
    assert!(v.decisive);
    assert_eq!(v.turn_span, 3);
    assert_eq!(report.summary.right_frontier_ruptures, 0);
}

#[test]
fn extract2_v87_is_a_licit_ascent() {
    let g = build_view(&doc(EXTRACT_2), Mode::Charity).unwrap();
    let event = g
        .history()
        .iter()
        .find(|e| e.new_node == id("V87.1"))
        .unwrap();
    assert!(event.on_frontier);
    // climbing: the site is above the previous attachment point
    assert_ne!(event.frontier_snapshot[0], event.realized_site);
    assert!(g.violations().iter().all(|v| v.trigger_node != id("V87.1")));
    assert!(g.expectation(&id("V87.1")).unwrap().is_open());
}

#[test]
fn control_dialogue_is_clean() {
    let report = analyze(&doc(CONTROL)).unwrap();
    assert!(report.violations.is_empty());
    assert!(report.repair_notes.is_empty());
    assert_eq!(report.charity_view.edges(), report.repair_view.edges());
    build_view(&doc(CONTROL), Mode::Strict).unwrap();
}

#[test]
fn fixture_json_round_trip() {
    for src in [EXTRACT_1, EXTRACT_2, CONTROL] {
        for mode in [Mode::Charity, Mode::Repair] {
            let g = build_view(&doc(src), mode).unwrap();
            let back = from_json(export_tree(&g, Format::Json).as_bytes()).unwrap();
            assert_eq!(back, g);
        }
    }
}

#[test]
fn fixture_outline() {
    let g = build_view(&doc(EXTRACT_2), Mode::Charity).unwrap();
    let text = export_tree(&g, Format::Text);
    assert!(text.starts_with("ROOT\n  G82.1 <Elaboration> [etat]"));
    assert!(text.contains("\n    G88.1 <Elaboration> [perte] Oui j'ai peur de perdre tout le monde\n"));
}

#[test]
fn corpus_of_bundled_fixtures() {
    let reports: Vec<_> = [EXTRACT_1, EXTRACT_2, CONTROL]
        .iter()
        .map(|s| analyze(&doc(s)).unwrap())
        .collect();
    let summary = corpus_summary(&reports);
    assert_eq!(summary.by_kind[&ViolationKind::RightFrontierRupture], 2);
    assert_eq!(summary.by_kind[&ViolationKind::AscentWithoutClosure], 1);
    assert_eq!(summary.records.len(), 3);
    assert_eq!(summary.records[0].population, Population::SchP);
}

#[test]
fn nine_decisive_paranoid_reports_feed_the_binomial_test() {
    let report = analyze(&doc(EXTRACT_2)).unwrap();
    let reports = vec![report; 9];
    let mut records = corpus_summary(&reports).records;
    assert!(records
        .iter()
        .all(|r| r.population == Population::SchP
            && r.discontinuity == sdrs_core::transcript::Discontinuity::Decisive));
    // complete the comparison with disorganized and control sequences
    let mut rest = load_sequence_records(
        b"sequence_id,population,medication,discontinuity\nd1,SCH-D,A,none\nd2,SCH-D,A,non-decisive\nh1,HC,none,none\nh2,HC,none,non-decisive\np1,SCH-P,A,none\n",
    )
    .unwrap();
    records.append(&mut rest);
    let t2 = table2(&records).unwrap();
    let binomial = &t2.decisive_tests[0];
    assert_eq!((binomial.successes, binomial.trials), (9, 9));
    assert!((binomial.result.p_value - 0.001953125).abs() < 1e-12);
}

#[test]
fn paper_tables() {
    let records = load_sequence_records(PAPER_COUNTS.as_bytes()).unwrap();
    assert_eq!(records.len(), 403);
    let t2 = table2(&records).unwrap();
    let text = t2.render_text();
    assert!(text.contains("80 (38%)"), "{text}");
    assert!(text.contains("128 (62%)"));
    assert!(text.contains("71 (34%)"));
    assert!(text.contains("44 (98%)"));
    let totals: Vec<u64> = [Population::SchP, Population::SchD, Population::Hc]
        .iter()
        .map(|p| t2.groups[p].total())
        .collect();
    assert_eq!(totals, [208, 150, 45]);
    let pd = &t2.comparisons[3];
    assert_eq!(pd.label, "SCH-P vs SCH-D");
    assert!((pd.discontinuity.p_value - 0.319).abs() < 0.002);
    assert!((pd.non_decisive.p_value - 0.649).abs() < 0.002);
    for c in &t2.comparisons[..3] {
        assert!(c.discontinuity.p_value < 0.001, "{}", c.label);
        assert!(c.non_decisive.p_value < 0.001, "{}", c.label);
    }
    for t in &t2.decisive_tests {
        assert!((t.result.p_value - 0.00195).abs() < 1e-5);
    }

    let t3 = table3(&records).unwrap();
    assert!(t3.warnings.is_empty());
    let untreated = &t3.strata[0];
    assert_eq!(untreated.label(), "SCH-S");
    assert!((untreated.test.statistic - 22.015).abs() < 0.01);
    let treated = &t3.strata[1];
    assert!((treated.test.statistic - 13.141).abs() < 0.01);
    let text = t3.render_text();
    assert!(text.contains("12 (20%)") && text.contains("28 (67%)"), "{text}");
    assert!(text.contains("chi2=22.015") && text.contains("chi2=13.141"));
}
