//! Random generators and brute-force oracles shared by the test suites.
//! Nothing here calls into the code paths the oracles are checked against.

use std::collections::BTreeMap;

use num::{BigRational, One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdrs_core::graph::DiscourseGraph;
use sdrs_core::model::{Act, ActId, Mode, NodeId, Prosody, Relation, Role, Theme, TurnId};
use sdrs_core::transcript::{ActEntry, Annotation, TranscriptDocument, Turn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const THEMES: [&str; 4] = ["politique", "mort", "famille", "travail"];
const WORDS: [&str; 8] = ["oui", "non", "enfin", "euh", "la", "maladie", "c'est", "vous"];

fn random_text<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(0..6);
    let mut parts: Vec<String> = Vec::new();
    for _ in 0..len {
        if rng.gen_bool(0.25) {
            parts.push(Prosody::ALL.choose(rng).unwrap().glyph().to_string());
        } else {
            parts.push(WORDS.choose(rng).unwrap().to_string());
        }
    }
    parts.join(" ")
}

/// A transcript of up to `max_acts` acts between an interviewer `A` and a
/// patient `B`. Roughly four acts in five carry an annotation naming a
/// uniformly chosen earlier node (or the root) and a random relation.
pub fn random_transcript<R: Rng>(rng: &mut R, max_acts: usize) -> TranscriptDocument {
    let n_acts = rng.gen_range(0..=max_acts);
    let mut turns: Vec<Turn> = Vec::new();
    let mut earlier: Vec<ActId> = Vec::new();
    let mut number = rng.gen_range(1..200u32);
    while earlier.len() < n_acts {
        let speaker = if turns.len().is_multiple_of(2) { "B" } else { "A" };
        let id = TurnId::new(speaker, number).unwrap();
        number += rng.gen_range(1..3);
        let size = rng.gen_range(1..=3).min(n_acts - earlier.len());
        let mut acts = Vec::new();
        for sub in 1..=size as u32 {
            let annotation = rng.gen_bool(0.8).then(|| {
                let pick = rng.gen_range(0..=earlier.len());
                Annotation {
                    site: earlier.get(pick).cloned().map_or(NodeId::Root, NodeId::Act),
                    relation: *Relation::ALL.choose(rng).unwrap(),
                }
            });
            let text = random_text(rng);
            let prosody = sdrs_core::transcript::scan_prosody(&text).unwrap();
            acts.push(ActEntry {
                text,
                theme: Theme::new(*THEMES.choose(rng).unwrap()),
                prosody,
                annotation,
            });
            earlier.push(ActId::new(id.clone(), sub).unwrap());
        }
        turns.push(Turn {
            id,
            speaker: speaker.to_string(),
            acts,
        });
    }
    TranscriptDocument {
        dialogue_id: format!("gen-{}", rng.gen::<u32>()),
        speakers: BTreeMap::from([
            ("A".to_string(), Role::Interviewer),
            ("B".to_string(), Role::Patient),
        ]),
        population: None,
        medication: None,
        turns,
    }
}

/// Attempts `n_acts` attachments at uniformly chosen existing nodes with
/// random relations. Rejected attempts (strict mode) are dropped. `step`
/// sees the graph after every successful attachment.
pub fn random_attachment_run<R: Rng>(
    rng: &mut R,
    n_acts: usize,
    mode: Mode,
    mut step: impl FnMut(&DiscourseGraph),
) -> DiscourseGraph {
    let mut g = DiscourseGraph::new("random");
    let mut nodes = vec![NodeId::Root];
    for i in 0..n_acts {
        let speaker = if rng.gen_bool(0.5) { "A" } else { "B" };
        let act = Act {
            id: ActId::new(TurnId::new(speaker, i as u32 + 1).unwrap(), 1).unwrap(),
            speaker: speaker.to_string(),
            role: if speaker == "A" { Role::Interviewer } else { Role::Patient },
            text: String::new(),
            theme: Theme::new(*THEMES.choose(rng).unwrap()),
            prosody: Vec::new(),
        };
        let site = nodes.choose(rng).unwrap().clone();
        let relation = *Relation::ALL.choose(rng).unwrap();
        let id = act.id.clone();
        if g.attach(act, site, relation, mode).is_ok() {
            nodes.push(NodeId::Act(id));
            step(&g);
        }
    }
    g
}

/// Right frontier recomputed from scratch: scan every node and keep the
/// last one, the root, and each ancestor of the last node whose edge toward
/// it is subordinating. Sorted bottom-up.
pub fn brute_force_frontier(graph: &DiscourseGraph) -> Vec<NodeId> {
    let last = graph.last_node();
    let mut path = vec![last.clone()];
    while let Some(NodeId::Act(id)) = path.last().cloned() {
        path.push(graph.parent(&id).expect("acts have parents").0);
    }

    let mut all: Vec<NodeId> = vec![NodeId::Root];
    all.extend(graph.acts().map(|a| NodeId::Act(a.id.clone())));
    let mut keep: Vec<(usize, NodeId)> = all
        .into_iter()
        .filter(|n| {
            if *n == last || n.is_root() {
                return true;
            }
            match path.iter().position(|p| p == n) {
                Some(pos) if pos > 0 => {
                    let child = path[pos - 1].act().expect("below an ancestor").clone();
                    let (_, relation) = graph.parent(&child).unwrap();
                    relation.is_subordinating()
                }
                _ => false,
            }
        })
        .map(|n| (graph.depth(&n).unwrap(), n))
        .collect();
    keep.sort_by_key(|k| std::cmp::Reverse(k.0));
    keep.into_iter().map(|(_, n)| n).collect()
}

/// P(at least k successes) by summing over all 2^n outcome sequences.
pub fn binomial_tail_by_enumeration(k: u32, n: u32, p0: &BigRational) -> BigRational {
    let q0 = BigRational::one() - p0;
    let mut total = BigRational::zero();
    for mask in 0u64..(1u64 << n) {
        let ones = mask.count_ones();
        if ones >= k {
            total += num::pow(p0.clone(), ones as usize) * num::pow(q0.clone(), (n - ones) as usize);
        }
    }
    total
}

/// Upper tail of chi-square(1) by composite Simpson integration of the
/// density. With t = u², the density integrand becomes the smooth
/// 2/sqrt(2π)·exp(-u²/2) on [0, sqrt(x)].
pub fn chi2_df1_tail_by_quadrature(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let upper = x.sqrt();
    let steps = 20_000;
    let h = upper / steps as f64;
    let f = |u: f64| 2.0 / (2.0 * std::f64::consts::PI).sqrt() * (-u * u / 2.0).exp();
    let mut sum = f(0.0) + f(upper);
    for i in 1..steps {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * f(i as f64 * h);
    }
    1.0 - sum * h / 3.0
}

/// Acts the charity view kept off the frontier, recomputed by replaying the
/// history snapshots.
pub fn off_frontier_requests(graph: &DiscourseGraph) -> usize {
    graph
        .history()
        .iter()
        .filter(|e| !e.frontier_snapshot.contains(&e.requested_site))
        .count()
}
