//! Pragmatic discourse trees for annotated dialogues.
//!
//! Acts are attached one by one to a rooted tree of rhetorical relations.
//! The [`engine`] maintains the right frontier and the ledger of open
//! expectations, and builds the tree in three modes: `strict` rejects
//! off-frontier attachments, `charity` keeps them and reports a
//! right-frontier rupture, `repair` moves them onto the frontier and notes
//! the resulting theme clash. [`analysis`] runs the charity and repair views
//! side by side and classifies what it finds; [`stats`] holds the
//! contingency tests used on corpus counts.

pub mod analysis;
pub mod engine;
pub mod export;
pub mod graph;
pub mod model;
pub mod stats;
pub mod transcript;

pub use analysis::{analyze, build_view, classify_decisive, corpus_summary, AnalysisReport};
pub use engine::{resolve_site, right_frontier, AttachError, AttachOutcome, Frontier};
pub use export::{export_tree, Format};
pub use graph::{DiscourseGraph, Edge};
pub use model::{
    relation_profile, Act, ActId, Mode, NodeId, Relation, Role, Theme, ViolationKind,
    ViolationRecord,
};
pub use transcript::{load_sequence_records, parse_transcript, TranscriptDocument};
