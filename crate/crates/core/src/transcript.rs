//! Annotated transcript format and corpus sequence records.
//!
//! A transcript is line oriented UTF-8:
//!
//! ```text
//! #dialogue extract-1
//! #speaker A interviewer
//! #speaker B patient
//! #population SCH-P
//! #medication A
//! B124.1 B theme=politique attach=ROOT:Elaboration | Oh ouais (↑) et pis compliqué (↓)
//! A125.1 A theme=politique attach=B124.1:Phatique | oui
//! ```
//!
//! `#population` and `#medication` are optional and only feed corpus
//! summaries. Blank lines and lines starting with `%` are ignored. Themes are
//! single tokens; the text after the first `|` is the utterance, where
//! `(↑)`, `(↓)`, `(→)` and `(...)` mark rise, fall, continuation and pause.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Act, ActId, NodeId, Prosody, Relation, Role, Theme, TurnId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("transcript is not valid UTF-8")]
    Encoding,
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: act {act} attaches to {site}, which does not appear earlier")]
    DanglingSite { line: usize, act: ActId, site: ActId },
    #[error("line {line}: duplicate act id {act}")]
    DuplicateAct { line: usize, act: ActId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub site: NodeId,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActEntry {
    pub text: String,
    pub theme: Theme,
    pub prosody: Vec<Prosody>,
    pub annotation: Option<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub id: TurnId,
    pub speaker: String,
    pub acts: Vec<ActEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptDocument {
    pub dialogue_id: String,
    pub speakers: BTreeMap<String, Role>,
    pub population: Option<Population>,
    pub medication: Option<Medication>,
    pub turns: Vec<Turn>,
}

impl TranscriptDocument {
    pub fn act_count(&self) -> usize {
        self.turns.iter().map(|t| t.acts.len()).sum()
    }

    /// Acts with their annotations, in document order.
    pub fn acts(&self) -> Vec<(Act, Option<&Annotation>)> {
        let mut out = Vec::with_capacity(self.act_count());
        for turn in &self.turns {
            let role = self
                .speakers
                .get(&turn.speaker)
                .copied()
                .unwrap_or(Role::Unspecified);
            for (i, entry) in turn.acts.iter().enumerate() {
                let id = ActId::new(turn.id.clone(), i as u32 + 1).expect("sub-index starts at 1");
                let act = Act {
                    id,
                    speaker: turn.speaker.clone(),
                    role,
                    text: entry.text.clone(),
                    theme: entry.theme.clone(),
                    prosody: entry.prosody.clone(),
                };
                out.push((act, entry.annotation.as_ref()));
            }
        }
        out
    }

    /// Canonical text form; `parse_transcript` reads it back unchanged.
    pub fn serialize(&self) -> String {
        let mut out = format!("#dialogue {}\n", self.dialogue_id);
        for (tag, role) in &self.speakers {
            out.push_str(&format!("#speaker {tag} {role}\n"));
        }
        if let Some(p) = self.population {
            out.push_str(&format!("#population {p}\n"));
        }
        if let Some(m) = self.medication {
            out.push_str(&format!("#medication {m}\n"));
        }
        for turn in &self.turns {
            for (i, entry) in turn.acts.iter().enumerate() {
                out.push_str(&format!(
                    "{}.{} {} theme={}",
                    turn.id,
                    i + 1,
                    turn.speaker,
                    entry.theme
                ));
                if let Some(a) = &entry.annotation {
                    out.push_str(&format!(" attach={}:{}", a.site, a.relation));
                }
                out.push_str(" | ");
                out.push_str(&entry.text);
                out.push('\n');
            }
        }
        out
    }
}

impl FromStr for TranscriptDocument {
    type Err = TranscriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_str(s)
    }
}

pub fn parse_transcript(input: &[u8]) -> Result<TranscriptDocument, TranscriptError> {
    let text = std::str::from_utf8(input).map_err(|_| TranscriptError::Encoding)?;
    parse_str(text)
}

/// Extracts the prosody tokens of an utterance. Arrow characters outside the
/// four recognized glyphs are rejected; the error carries the 0-based char
/// offset of the offending character.
pub fn scan_prosody(text: &str) -> Result<Vec<Prosody>, (usize, char)> {
    let mut tokens = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(c) = rest.chars().next() {
        if let Some(p) = Prosody::ALL.iter().find(|p| rest.starts_with(p.glyph())) {
            tokens.push(*p);
            offset += p.glyph().chars().count();
            rest = &rest[p.glyph().len()..];
            continue;
        }
        if ('\u{2190}'..='\u{21FF}').contains(&c) {
            return Err((offset, c));
        }
        offset += 1;
        rest = &rest[c.len_utf8()..];
    }
    Ok(tokens)
}

struct LineCtx<'a> {
    no: usize,
    text: &'a str,
}

impl LineCtx<'_> {
    fn err(&self, byte_offset: usize, message: impl Into<String>) -> TranscriptError {
        TranscriptError::Syntax {
            line: self.no,
            column: self.text[..byte_offset.min(self.text.len())].chars().count() + 1,
            message: message.into(),
        }
    }

    /// Byte offset of a sub-slice of the line.
    fn at(&self, part: &str) -> usize {
        part.as_ptr() as usize - self.text.as_ptr() as usize
    }
}

fn parse_str(input: &str) -> Result<TranscriptDocument, TranscriptError> {
    let mut dialogue_id: Option<String> = None;
    let mut speakers = BTreeMap::new();
    let mut population = None;
    let mut medication = None;
    let mut turns: Vec<Turn> = Vec::new();
    let mut seen: HashSet<ActId> = HashSet::new();

    for (i, raw) in input.lines().enumerate() {
        let line = LineCtx { no: i + 1, text: raw };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }

        if let Some(directive) = trimmed.strip_prefix('#') {
            if !turns.is_empty() {
                return Err(line.err(line.at(trimmed), "directives must precede act lines"));
            }
            let mut words = directive.split_whitespace();
            let name = words.next().unwrap_or("");
            let args: Vec<&str> = words.collect();
            let arg_at = |k: usize| args.get(k).map_or(raw.len(), |a| line.at(a));
            match (name, args.as_slice()) {
                ("dialogue", [id]) => {
                    if dialogue_id.is_some() {
                        return Err(line.err(line.at(trimmed), "duplicate #dialogue line"));
                    }
                    dialogue_id = Some(id.to_string());
                }
                ("speaker", [tag, role]) => {
                    let role: Role = role
                        .parse()
                        .map_err(|_| line.err(arg_at(1), format!("unknown role `{role}`")))?;
                    if speakers.insert(tag.to_string(), role).is_some() {
                        return Err(line.err(arg_at(0), format!("speaker `{tag}` declared twice")));
                    }
                }
                ("population", [p]) => {
                    population = Some(p.parse().map_err(|e: String| line.err(arg_at(0), e))?);
                }
                ("medication", [m]) => {
                    medication = Some(m.parse().map_err(|e: String| line.err(arg_at(0), e))?);
                }
                ("dialogue" | "speaker" | "population" | "medication", _) => {
                    return Err(line.err(line.at(trimmed), format!("wrong arguments for #{name}")));
                }
                _ => {
                    return Err(line.err(line.at(trimmed), format!("unknown directive #{name}")));
                }
            }
            continue;
        }

        if dialogue_id.is_none() {
            return Err(line.err(line.at(trimmed), "missing #dialogue line"));
        }
        let (head, text) = trimmed
            .split_once('|')
            .ok_or_else(|| line.err(line.at(trimmed) + trimmed.len(), "expected `|` before the utterance"))?;
        let text = text.trim();
        let tokens: Vec<&str> = head.split_whitespace().collect();
        if !(3..=4).contains(&tokens.len()) {
            return Err(line.err(
                line.at(trimmed),
                "expected `<act> <speaker> theme=<label> [attach=<site>:<relation>] | <text>`",
            ));
        }

        let act: ActId = tokens[0]
            .parse()
            .map_err(|e: crate::model::ModelError| line.err(line.at(tokens[0]), e.to_string()))?;
        if seen.contains(&act) {
            return Err(TranscriptError::DuplicateAct { line: line.no, act });
        }

        let speaker = tokens[1];
        if !speakers.contains_key(speaker) {
            return Err(line.err(line.at(speaker), format!("undeclared speaker `{speaker}`")));
        }

        let theme = tokens[2]
            .strip_prefix("theme=")
            .filter(|t| !t.is_empty())
            .ok_or_else(|| line.err(line.at(tokens[2]), "expected theme=<label>"))?;

        let annotation = match tokens.get(3) {
            None => None,
            Some(tok) => {
                let spec = tok
                    .strip_prefix("attach=")
                    .ok_or_else(|| line.err(line.at(tok), "expected attach=<site>:<relation>"))?;
                let (site, rel) = spec
                    .rsplit_once(':')
                    .ok_or_else(|| line.err(line.at(tok), "expected attach=<site>:<relation>"))?;
                let site: NodeId = site
                    .parse()
                    .map_err(|_| line.err(line.at(tok), format!("bad attachment site `{site}`")))?;
                let relation: Relation = rel
                    .parse()
                    .map_err(|e: crate::model::ModelError| line.err(line.at(tok), e.to_string()))?;
                if let NodeId::Act(site_act) = &site {
                    if !seen.contains(site_act) {
                        return Err(TranscriptError::DanglingSite {
                            line: line.no,
                            act,
                            site: site_act.clone(),
                        });
                    }
                }
                Some(Annotation { site, relation })
            }
        };

        let prosody = scan_prosody(text).map_err(|(off, c)| {
            let byte = text.char_indices().nth(off).map_or(0, |(b, _)| b);
            line.err(line.at(text) + byte, format!("unknown prosody glyph `{c}`"))
        })?;

        let entry = ActEntry {
            text: text.to_string(),
            theme: Theme::new(theme),
            prosody,
            annotation,
        };

        match turns.last_mut() {
            Some(turn) if &turn.id == act.turn() => {
                if turn.speaker != speaker {
                    return Err(line.err(
                        line.at(speaker),
                        format!("turn {} already belongs to speaker `{}`", turn.id, turn.speaker),
                    ));
                }
                if act.sub_index() as usize != turn.acts.len() + 1 {
                    return Err(line.err(
                        line.at(tokens[0]),
                        format!("expected sub-index {} in turn {}", turn.acts.len() + 1, turn.id),
                    ));
                }
                turn.acts.push(entry);
            }
            last => {
                if let Some(prev) = last {
                    if act.turn() <= &prev.id {
                        return Err(line.err(
                            line.at(tokens[0]),
                            format!("turn {} does not follow turn {}", act.turn(), prev.id),
                        ));
                    }
                }
                if act.sub_index() != 1 {
                    return Err(line.err(
                        line.at(tokens[0]),
                        format!("turn {} must start at sub-index 1", act.turn()),
                    ));
                }
                turns.push(Turn {
                    id: act.turn().clone(),
                    speaker: speaker.to_string(),
                    acts: vec![entry],
                });
            }
        }
        seen.insert(act);
    }

    let dialogue_id = dialogue_id.ok_or(TranscriptError::Syntax {
        line: 1,
        column: 1,
        message: "missing #dialogue line".into(),
    })?;
    Ok(TranscriptDocument {
        dialogue_id,
        speakers,
        population,
        medication,
        turns,
    })
}

macro_rules! csv_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} `{}`",
                        stringify!($name).to_lowercase(),
                        other
                    )),
                }
            }
        }
    };
}

csv_enum!(Population {
    SchP => "SCH-P",
    SchD => "SCH-D",
    Hc => "HC",
});

csv_enum!(Medication {
    Antipsychotic => "A",
    Untreated => "S",
    None => "none",
});

csv_enum!(Discontinuity {
    None => "none",
    NonDecisive => "non-decisive",
    Decisive => "decisive",
});

/// One conversational sequence (transaction) of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub sequence_id: String,
    pub population: Population,
    pub medication: Medication,
    pub discontinuity: Discontinuity,
}

pub const SEQUENCE_HEADER: [&str; 4] = ["sequence_id", "population", "medication", "discontinuity"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("expected header `sequence_id,population,medication,discontinuity`, found `{0}`")]
    BadHeader(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: HC sequences cannot carry medication `{medication}`")]
    ControlWithMedication { row: usize, medication: Medication },
    #[error("malformed CSV: {0}")]
    Csv(String),
}

/// Reads comma-separated sequence records. Rows are numbered from 1, the
/// header excluded.
pub fn load_sequence_records(input: &[u8]) -> Result<Vec<SequenceRecord>, RecordError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| RecordError::Csv(e.to_string()))?;
    if header.iter().ne(SEQUENCE_HEADER) {
        return Err(RecordError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| RecordError::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let bad = |message: String| RecordError::Row { row: row_no, message };
        let record = SequenceRecord {
            sequence_id: field(0).to_string(),
            population: field(1).parse().map_err(bad)?,
            medication: field(2).parse().map_err(bad)?,
            discontinuity: field(3).parse().map_err(bad)?,
        };
        if record.population == Population::Hc && record.medication != Medication::None {
            return Err(RecordError::ControlWithMedication {
                row: row_no,
                medication: record.medication,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_sequence_records(records: &[SequenceRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(SEQUENCE_HEADER).expect("in-memory write");
    for r in records {
        writer
            .write_record([
                r.sequence_id.as_str(),
                r.population.as_str(),
                r.medication.as_str(),
                r.discontinuity.as_str(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "#dialogue t\n#speaker A interviewer\n#speaker B patient\n";

    fn parse(body: &str) -> Result<TranscriptDocument, TranscriptError> {
        parse_transcript(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn rise_glyph_maps_to_rise() {
        let doc = parse("B124.1 B theme=politique | Oh ouais (↑) et pis compliqué (↓) euh (...) c'est (→)\n")
            .unwrap();
        assert_eq!(
            doc.turns[0].acts[0].prosody,
            vec![Prosody::Rise, Prosody::Fall, Prosody::Pause, Prosody::Continuation]
        );
    }

    #[test]
    fn no_turns_means_no_acts() {
        let doc = parse("").unwrap();
        assert_eq!(doc.act_count(), 0);
        assert_eq!(doc.speakers.len(), 2);
    }

    #[test]
    fn dangling_site_is_reported() {
        let err = parse("B1.1 B theme=x | a\nA2.1 A theme=x attach=Z999.1:Question | b\n").unwrap_err();
        assert_eq!(
            err,
            TranscriptError::DanglingSite {
                line: 5,
                act: "A2.1".parse().unwrap(),
                site: "Z999.1".parse().unwrap(),
            }
        );
    }

    #[test]
    fn self_reference_is_dangling() {
        let err = parse("B1.1 B theme=x attach=B1.1:Elaboration | a\n").unwrap_err();
        assert!(matches!(err, TranscriptError::DanglingSite { .. }));
    }

    #[test]
    fn duplicate_act_is_reported() {
        let err = parse("B1.1 B theme=x | a\nB1.1 B theme=x | a\n").unwrap_err();
        assert!(matches!(err, TranscriptError::DuplicateAct { line: 5, .. }));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("B1.1 B theme=x attach=ROOT:Explanation | a\n").unwrap_err();
        match err {
            TranscriptError::Syntax { line, column, message } => {
                assert_eq!((line, column), (4, 16));
                assert!(message.contains("Explanation"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("B1.1 B theme=x | up ↗ here\n").unwrap_err();
        assert!(matches!(err, TranscriptError::Syntax { line: 4, column: 21, .. }), "{err:?}");
        assert!(matches!(parse("B1.1 Q theme=x | a\n"), Err(TranscriptError::Syntax { .. })));
        assert!(matches!(parse("B1.1 B theme= | a\n"), Err(TranscriptError::Syntax { .. })));
        assert!(matches!(parse("B1.1 B theme=x a\n"), Err(TranscriptError::Syntax { .. })));
        assert!(matches!(
            parse_transcript(b"B1.1 B theme=x | a\n"),
            Err(TranscriptError::Syntax { .. })
        ));
        assert_eq!(parse_transcript(&[0xff, 0xfe]), Err(TranscriptError::Encoding));
    }

    #[test]
    fn turn_order_is_numeric() {
        assert!(parse("B124.1 B theme=x | a\nA125.1 A theme=x | b\nB126.1 B theme=x | c\n").is_ok());
        let err = parse("B126.1 B theme=x | a\nA125.1 A theme=x | b\n").unwrap_err();
        assert!(err.to_string().contains("does not follow"));
        let err = parse("B1.1 B theme=x | a\nB1.3 B theme=x | b\n").unwrap_err();
        assert!(err.to_string().contains("sub-index 2"));
        let err = parse("B1.2 B theme=x | a\n").unwrap_err();
        assert!(err.to_string().contains("sub-index 1"));
    }

    #[test]
    fn french_relation_alias_in_annotation() {
        let doc = parse("B1.1 B theme=x | a\nA2.1 A theme=x attach=B1.1:Phatique | oui\n").unwrap();
        assert_eq!(
            doc.turns[1].acts[0].annotation.as_ref().unwrap().relation,
            Relation::Phatic
        );
    }

    #[test]
    fn serialize_round_trip() {
        let src = "#dialogue t\n#speaker A interviewer\n#speaker B patient\n#population SCH-D\n\
                   B1.1 B theme=x attach=ROOT:Elaboration | a (↑)\nB1.2 B theme=y | b | c\n";
        let doc: TranscriptDocument = src.parse().unwrap();
        assert_eq!(doc.serialize(), src);
        assert_eq!(doc.serialize().parse::<TranscriptDocument>().unwrap(), doc);
    }

    #[test]
    fn records_counts() {
        let mut csv = String::from("sequence_id,population,medication,discontinuity\n");
        for i in 0..208 {
            let d = if i < 80 { "non-decisive" } else { "none" };
            csv.push_str(&format!("p{i},SCH-P,A,{d}\n"));
        }
        let records = load_sequence_records(csv.as_bytes()).unwrap();
        let disc = records
            .iter()
            .filter(|r| r.discontinuity != Discontinuity::None)
            .count();
        assert_eq!((disc, records.len() - disc), (80, 128));
    }

    #[test]
    fn header_only_is_empty() {
        let records = load_sequence_records(b"sequence_id,population,medication,discontinuity\n").unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn control_with_medication_rejected() {
        let err = load_sequence_records(b"sequence_id,population,medication,discontinuity\nh1,HC,A,none\n")
            .unwrap_err();
        assert_eq!(
            err,
            RecordError::ControlWithMedication {
                row: 1,
                medication: Medication::Antipsychotic
            }
        );
    }

    #[test]
    fn unknown_value_names_row() {
        let err = load_sequence_records(
            b"sequence_id,population,medication,discontinuity\nx,HC,none,none\ny,SCH-X,A,none\n",
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "row 2: unknown population `SCH-X`");
        assert!(matches!(
            load_sequence_records(b"id,pop\n"),
            Err(RecordError::BadHeader(_))
        ));
    }

    #[test]
    fn records_write_read() {
        let recs = vec![SequenceRecord {
            sequence_id: "s1".into(),
            population: Population::SchP,
            medication: Medication::Untreated,
            discontinuity: Discontinuity::Decisive,
        }];
        let text = write_sequence_records(&recs);
        assert_eq!(load_sequence_records(text.as_bytes()).unwrap(), recs);
    }
}
