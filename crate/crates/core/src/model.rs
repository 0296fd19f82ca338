//! Domain vocabulary shared by every other module: identifiers, relation
//! labels, acts, theme boxes and the records produced while building a tree.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown relation name `{0}`")]
    UnknownRelation(String),
    #[error("`{0}` is coordinating; only subordinating relations can open an expectation")]
    CoordinatingRelation(Relation),
    #[error("malformed turn id `{0}` (expected letters followed by a number, e.g. B124)")]
    BadTurnId(String),
    #[error("malformed act id `{0}` (expected <turn>.<sub-index>, e.g. B132.3)")]
    BadActId(String),
    #[error("unknown speaker role `{0}`")]
    UnknownRole(String),
}

/// Serde through `Display`/`FromStr` so ids appear as plain strings in JSON.
macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// A turn label such as `B124`: a speaker prefix and a counter shared by
/// all speakers. Turns order by the counter first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TurnId {
    prefix: String,
    number: u32,
}

impl TurnId {
    pub fn new(prefix: &str, number: u32) -> Result<Self, ModelError> {
        if prefix.is_empty() || !prefix.chars().all(char::is_alphabetic) {
            return Err(ModelError::BadTurnId(format!("{prefix}{number}")));
        }
        Ok(TurnId {
            prefix: prefix.to_string(),
            number,
        })
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn number(&self) -> u32 {
        self.number
    }
}

impl Ord for TurnId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.number
            .cmp(&other.number)
            .then_with(|| self.prefix.cmp(&other.prefix))
    }
}

impl PartialOrd for TurnId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TurnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.prefix, self.number)
    }
}

impl FromStr for TurnId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadTurnId(s.to_string());
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let (prefix, digits) = s.split_at(split);
        // leading zeros would not survive a Display round trip
        if digits.is_empty()
            || !digits.chars().all(|c| c.is_ascii_digit())
            || (digits.len() > 1 && digits.starts_with('0'))
        {
            return Err(bad());
        }
        let number = digits.parse().map_err(|_| bad())?;
        TurnId::new(prefix, number).map_err(|_| bad())
    }
}

string_serde!(TurnId);

/// Act identifier: turn label plus a 1-based sub-index (`B132.3`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActId {
    turn: TurnId,
    sub: u32,
}

impl ActId {
    pub fn new(turn: TurnId, sub: u32) -> Result<Self, ModelError> {
        if sub == 0 {
            return Err(ModelError::BadActId(format!("{turn}.0")));
        }
        Ok(ActId { turn, sub })
    }

    pub fn turn(&self) -> &TurnId {
        &self.turn
    }

    pub fn sub_index(&self) -> u32 {
        self.sub
    }
}

impl fmt::Display for ActId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.turn, self.sub)
    }
}

impl FromStr for ActId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadActId(s.to_string());
        let (turn, sub) = s.rsplit_once('.').ok_or_else(bad)?;
        let turn: TurnId = turn.parse().map_err(|_| bad())?;
        if sub.is_empty() || sub.starts_with('0') || !sub.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        ActId::new(turn, sub.parse().map_err(|_| bad())?)
    }
}

string_serde!(ActId);

/// A node of the discourse tree: the empty-semantics root or an act.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Root,
    Act(ActId),
}

impl NodeId {
    pub const ROOT_LABEL: &'static str = "ROOT";

    pub fn is_root(&self) -> bool {
        matches!(self, NodeId::Root)
    }

    pub fn act(&self) -> Option<&ActId> {
        match self {
            NodeId::Root => None,
            NodeId::Act(id) => Some(id),
        }
    }
}

impl From<ActId> for NodeId {
    fn from(id: ActId) -> Self {
        NodeId::Act(id)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Root => f.write_str(Self::ROOT_LABEL),
            NodeId::Act(id) => id.fmt(f),
        }
    }
}

impl FromStr for NodeId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == Self::ROOT_LABEL {
            Ok(NodeId::Root)
        } else {
            s.parse().map(NodeId::Act)
        }
    }
}

string_serde!(NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Subordinating,
    Coordinating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Conversational,
    MetaConversational,
}

/// Rhetorical relation between an act and its attachment site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    Question,
    Elaboration,
    CounterElaboration,
    ClarificationRequest,
    Conduct,
    Phatic,
    Response,
    Narration,
    Clarification,
    CResponse,
}

impl Relation {
    pub const ALL: [Relation; 10] = [
        Relation::Question,
        Relation::Elaboration,
        Relation::CounterElaboration,
        Relation::ClarificationRequest,
        Relation::Conduct,
        Relation::Phatic,
        Relation::Response,
        Relation::Narration,
        Relation::Clarification,
        Relation::CResponse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Question => "Question",
            Relation::Elaboration => "Elaboration",
            Relation::CounterElaboration => "CounterElaboration",
            Relation::ClarificationRequest => "ClarificationRequest",
            Relation::Conduct => "Conduct",
            Relation::Phatic => "Phatic",
            Relation::Response => "Response",
            Relation::Narration => "Narration",
            Relation::Clarification => "Clarification",
            Relation::CResponse => "CResponse",
        }
    }

    pub fn orientation(self) -> Orientation {
        use Relation::*;
        match self {
            Question | Elaboration | CounterElaboration | ClarificationRequest | Conduct | Phatic => {
                Orientation::Subordinating
            }
            Response | Narration | Clarification | CResponse => Orientation::Coordinating,
        }
    }

    pub fn layer(self) -> Layer {
        use Relation::*;
        match self {
            Question | Elaboration | CounterElaboration | Response | Narration => {
                Layer::Conversational
            }
            ClarificationRequest | Conduct | Phatic | Clarification | CResponse => {
                Layer::MetaConversational
            }
        }
    }

    pub fn is_subordinating(self) -> bool {
        self.orientation() == Orientation::Subordinating
    }

    /// The coordinating relation that answers an expectation opened by
    /// `self`. Elaboration, CounterElaboration and Phatic open none.
    pub fn expected_closer(self) -> Result<Option<Relation>, ModelError> {
        match self {
            Relation::Question => Ok(Some(Relation::Response)),
            Relation::ClarificationRequest => Ok(Some(Relation::Clarification)),
            Relation::Conduct => Ok(Some(Relation::CResponse)),
            Relation::Elaboration | Relation::CounterElaboration | Relation::Phatic => Ok(None),
            coordinating => Err(ModelError::CoordinatingRelation(coordinating)),
        }
    }

    pub fn opens_expectation(self) -> bool {
        matches!(self.expected_closer(), Ok(Some(_)))
    }

    /// True when `self` is the closer some subordinating relation waits for.
    pub fn is_closer(self) -> bool {
        matches!(
            self,
            Relation::Response | Relation::Clarification | Relation::CResponse
        )
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lowercase, drop separators and fold the accents that occur in the French
/// relation names, so "Requête de clarification" and "requete-de-clarification"
/// compare equal.
fn relation_key(raw: &str) -> String {
    raw.chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_' | '\t'))
        .flat_map(char::to_lowercase)
        .map(|c| match c {
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'â' | 'à' => 'a',
            'î' | 'ï' => 'i',
            'ô' => 'o',
            'û' | 'ù' => 'u',
            'ç' => 'c',
            other => other,
        })
        .collect()
}

impl FromStr for Relation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let relation = match relation_key(s).as_str() {
            "question" => Relation::Question,
            "elaboration" => Relation::Elaboration,
            "counterelaboration" | "contreelaboration" => Relation::CounterElaboration,
            "clarificationrequest" | "requetedeclarification" => Relation::ClarificationRequest,
            "conduct" | "conduite" => Relation::Conduct,
            "phatic" | "phatique" => Relation::Phatic,
            "response" | "reponse" => Relation::Response,
            "narration" => Relation::Narration,
            "clarification" => Relation::Clarification,
            "cresponse" | "creponse" => Relation::CResponse,
            _ => return Err(ModelError::UnknownRelation(s.to_string())),
        };
        Ok(relation)
    }
}

/// A relation together with its fixed orientation and layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationLabel {
    pub name: Relation,
    pub orientation: Orientation,
    pub layer: Layer,
}

/// Looks up a relation by canonical English name or French alias.
pub fn relation_profile(name: &str) -> Result<RelationLabel, ModelError> {
    let relation: Relation = name.parse()?;
    Ok(RelationLabel {
        name: relation,
        orientation: relation.orientation(),
        layer: relation.layer(),
    })
}

/// `expected_closer` by name.
pub fn expected_closer(name: &str) -> Result<Option<Relation>, ModelError> {
    name.parse::<Relation>()?.expected_closer()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Patient,
    Interviewer,
    Unspecified,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Patient => "patient",
            Role::Interviewer => "interviewer",
            Role::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "patient" => Ok(Role::Patient),
            "interviewer" => Ok(Role::Interviewer),
            "unspecified" => Ok(Role::Unspecified),
            _ => Err(ModelError::UnknownRole(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prosody {
    Rise,
    Fall,
    Continuation,
    Pause,
}

impl Prosody {
    pub const ALL: [Prosody; 4] = [
        Prosody::Rise,
        Prosody::Fall,
        Prosody::Continuation,
        Prosody::Pause,
    ];

    /// The transcript glyph, parentheses included.
    pub fn glyph(self) -> &'static str {
        match self {
            Prosody::Rise => "(↑)",
            Prosody::Fall => "(↓)",
            Prosody::Continuation => "(→)",
            Prosody::Pause => "(...)",
        }
    }
}

/// Analyst-assigned theme label. Two themes match when they agree after
/// case folding and whitespace normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theme(String);

impl Theme {
    pub fn new(label: impl Into<String>) -> Self {
        Theme(label.into())
    }

    pub fn label(&self) -> &str {
        &self.0
    }

    pub fn key(&self) -> String {
        self.0
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase()
    }

    pub fn matches(&self, other: &Theme) -> bool {
        self.key() == other.key()
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Elementary discourse unit: one fragment of a speaker's turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Act {
    pub id: ActId,
    pub speaker: String,
    pub role: Role,
    pub text: String,
    pub theme: Theme,
    pub prosody: Vec<Prosody>,
}

impl Act {
    pub fn turn(&self) -> &TurnId {
        self.id.turn()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Strict,
    Charity,
    Repair,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Strict => "strict",
            Mode::Charity => "charity",
            Mode::Repair => "repair",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxStatus {
    Open,
    Closed,
}

/// Dotted grouping of acts sharing one theme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeBox {
    /// 1-based, in order of creation.
    pub box_id: usize,
    pub theme: Theme,
    pub members: Vec<ActId>,
    pub status: BoxStatus,
}

/// Audit record of one attachment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentEvent {
    pub new_node: ActId,
    pub requested_site: NodeId,
    /// Differs from `requested_site` only for repair-mode re-targeting.
    pub realized_site: NodeId,
    pub relation: Relation,
    pub frontier_snapshot: Vec<NodeId>,
    /// Whether `requested_site` was on the frontier.
    pub on_frontier: bool,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    RightFrontierRupture,
    AscentWithoutClosure,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::RightFrontierRupture => "RightFrontierRupture",
            ViolationKind::AscentWithoutClosure => "AscentWithoutClosure",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rank of the three constituents a decisive discontinuity implicates:
/// whole turns, or sub-acts inside one speaker's complex turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstituentRank {
    Intervention,
    Act,
}

impl ConstituentRank {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstituentRank::Intervention => "intervention",
            ConstituentRank::Act => "act",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub kind: ViolationKind,
    pub trigger_node: ActId,
    pub site_node: NodeId,
    /// Unclosed expectations the ascent climbed over; empty for ruptures.
    pub open_nodes: Vec<ActId>,
    pub constituent_rank: ConstituentRank,
    pub decisive: bool,
    pub turn_span: usize,
}

impl ViolationRecord {
    /// Unclassified record as emitted by the attachment engine.
    pub fn new(kind: ViolationKind, trigger: ActId, site: NodeId, open_nodes: Vec<ActId>) -> Self {
        ViolationRecord {
            kind,
            trigger_node: trigger,
            site_node: site,
            open_nodes,
            constituent_rank: ConstituentRank::Intervention,
            decisive: false,
            turn_span: 0,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        let ascent = self.kind == ViolationKind::AscentWithoutClosure;
        ascent != self.open_nodes.is_empty() && (!self.decisive || self.turn_span >= 3)
    }
}

/// Emitted by repair mode when an off-frontier request is moved onto the
/// frontier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairNote {
    pub trigger_node: ActId,
    pub requested_site: NodeId,
    pub realized_site: NodeId,
    pub act_theme: Theme,
    pub site_theme: Option<Theme>,
    /// The forced site carries a different theme than the act.
    pub semantic_inconsistency: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectationStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub node: ActId,
    pub opened_by: Relation,
    pub status: ExpectationStatus,
    pub closed_by: Option<ActId>,
}

impl Expectation {
    pub fn is_open(&self) -> bool {
        self.status == ExpectationStatus::Open
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_of_table_entries() {
        let q = relation_profile("Question").unwrap();
        assert_eq!(
            (q.orientation, q.layer),
            (Orientation::Subordinating, Layer::Conversational)
        );
        let n = relation_profile("Narration").unwrap();
        assert_eq!(
            (n.orientation, n.layer),
            (Orientation::Coordinating, Layer::Conversational)
        );
        let c = relation_profile("CResponse").unwrap();
        assert_eq!(
            (c.orientation, c.layer),
            (Orientation::Coordinating, Layer::MetaConversational)
        );
    }

    #[test]
    fn french_aliases() {
        assert_eq!("Réponse".parse::<Relation>().unwrap(), Relation::Response);
        assert_eq!(
            "Requête de clarification".parse::<Relation>().unwrap(),
            Relation::ClarificationRequest
        );
        assert_eq!("C-Réponse".parse::<Relation>().unwrap(), Relation::CResponse);
        assert_eq!(
            "Contre-élaboration".parse::<Relation>().unwrap(),
            Relation::CounterElaboration
        );
        assert_eq!("Conduite".parse::<Relation>().unwrap(), Relation::Conduct);
        assert_eq!("Phatique".parse::<Relation>().unwrap(), Relation::Phatic);
    }

    #[test]
    fn unknown_relation_rejected() {
        assert_eq!(
            relation_profile("Explanation"),
            Err(ModelError::UnknownRelation("Explanation".into()))
        );
    }

    #[test]
    fn partition_sizes() {
        let count = |o, l| {
            Relation::ALL
                .iter()
                .filter(|r| r.orientation() == o && r.layer() == l)
                .count()
        };
        use Layer::*;
        use Orientation::*;
        assert_eq!(count(Subordinating, Conversational), 3);
        assert_eq!(count(Coordinating, Conversational), 2);
        assert_eq!(count(Subordinating, MetaConversational), 3);
        assert_eq!(count(Coordinating, MetaConversational), 2);
        for r in Relation::ALL {
            assert_eq!(relation_profile(r.name()).unwrap().name, r);
        }
    }

    #[test]
    fn closers() {
        assert_eq!(expected_closer("Question"), Ok(Some(Relation::Response)));
        assert_eq!(expected_closer("Conduct"), Ok(Some(Relation::CResponse)));
        assert_eq!(
            expected_closer("ClarificationRequest"),
            Ok(Some(Relation::Clarification))
        );
        assert_eq!(expected_closer("Phatic"), Ok(None));
        assert_eq!(expected_closer("CounterElaboration"), Ok(None));
        assert_eq!(
            expected_closer("Response"),
            Err(ModelError::CoordinatingRelation(Relation::Response))
        );
    }

    #[test]
    fn turn_ids_order_numerically() {
        let ids: Vec<TurnId> = ["B124", "A125", "B126", "A9"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        assert!(ids[0] < ids[1] && ids[1] < ids[2]);
        assert!(ids[3] < ids[0]);
        assert!("B012".parse::<TurnId>().is_err());
        assert!("124".parse::<TurnId>().is_err());
    }

    #[test]
    fn act_and_node_ids_round_trip() {
        let id: ActId = "B132.3".parse().unwrap();
        assert_eq!(id.turn().to_string(), "B132");
        assert_eq!(id.sub_index(), 3);
        assert_eq!(id.to_string(), "B132.3");
        assert!("B132.0".parse::<ActId>().is_err());
        assert!("B132".parse::<ActId>().is_err());
        assert_eq!("ROOT".parse::<NodeId>().unwrap(), NodeId::Root);
        let json = serde_json::to_string(&NodeId::Act(id.clone())).unwrap();
        assert_eq!(json, "\"B132.3\"");
    }

    #[test]
    fn theme_matching_folds_case_and_space() {
        assert!(Theme::new("Mort  réelle").matches(&Theme::new("mort réelle")));
        assert!(!Theme::new("mort").matches(&Theme::new("politique")));
    }

    #[test]
    fn violation_well_formedness() {
        let id: ActId = "G88.1".parse().unwrap();
        let rupture = ViolationRecord::new(
            ViolationKind::RightFrontierRupture,
            id.clone(),
            NodeId::Root,
            vec![],
        );
        assert!(rupture.is_well_formed());
        let bad = ViolationRecord::new(ViolationKind::AscentWithoutClosure, id, NodeId::Root, vec![]);
        assert!(!bad.is_well_formed());
    }
}
