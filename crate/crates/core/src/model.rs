//! Belief schema: the typed unit of persistent context, its enumerations,
//! scope labels, provenance, change history and validation.
//!
//! The serde encoding of [`Belief`] is the canonical wire and fixture format
//! used by the store log, the HTTP service and the benchmark case files.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Maximum number of aliases a belief may ever carry.
pub const ALIAS_CEILING: usize = 25;
/// Allowed alias count for a freshly extracted belief.
pub const CREATION_ALIAS_RANGE: std::ops::RangeInclusive<usize> = 3..=5;
/// Maximum number of underscore-joined tokens in a canonical name.
pub const MAX_CANONICAL_TOKENS: usize = 5;

/// UTC instant with millisecond precision, encoded as RFC 3339 text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn from_datetime(dt: DateTime<Utc>) -> Self {
        Self::from_millis(dt.timestamp_millis())
    }

    /// Panics if `millis` is outside chrono's representable range.
    pub fn from_millis(millis: i64) -> Self {
        Self(
            Utc.timestamp_millis_opt(millis)
                .single()
                .expect("timestamp out of range"),
        )
    }

    pub fn millis(&self) -> i64 {
        self.0.timestamp_millis()
    }

    pub fn as_datetime(&self) -> DateTime<Utc> {
        self.0
    }

    /// Returns a timestamp `ms` milliseconds later.
    pub fn plus_millis(&self, ms: i64) -> Self {
        Self::from_millis(self.millis() + ms)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Millis, true))
    }
}

impl FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dt = DateTime::parse_from_rfc3339(s)?;
        Ok(Self::from_datetime(dt.with_timezone(&Utc)))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque belief identifier. Generated identifiers are UUIDs; fixtures may use
/// readable slugs such as `b-redis-code`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefId(String);

impl BeliefId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn generate() -> Self {
        Self(uuid::Uuid::new_v4().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BeliefId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BeliefId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for BeliefId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl Borrow<str> for BeliefId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefType {
    Preference,
    Decision,
    Entity,
    OpenQuestion,
    Relation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtype {
    Expertise,
    Style,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpistemicStatus {
    #[default]
    Active,
    Inferred,
    Exploratory,
    Superseded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertiseDepth {
    Learning,
    Working,
    Deep,
    Expert,
}

/// Hard context boundary. Text form is `user:universal`, `domain:<name>` or
/// `project:<name>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScopeLabel {
    Universal,
    Domain(String),
    Project(String),
}

impl ScopeLabel {
    pub fn domain(name: impl Into<String>) -> Self {
        Self::Domain(name.into())
    }

    pub fn project(name: impl Into<String>) -> Self {
        Self::Project(name.into())
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Self::Universal => None,
            Self::Domain(n) | Self::Project(n) => Some(n),
        }
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, Self::Universal)
    }
}

impl fmt::Display for ScopeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Universal => f.write_str("user:universal"),
            Self::Domain(n) => write!(f, "domain:{n}"),
            Self::Project(n) => write!(f, "project:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scope label `{0}`: expected user:universal, domain:<name> or project:<name>")]
pub struct ScopeParseError(pub String);

impl FromStr for ScopeLabel {
    type Err = ScopeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ScopeParseError(s.to_string());
        let (kind, name) = s.split_once(':').ok_or_else(err)?;
        let valid_name = !name.is_empty() && !name.chars().any(char::is_whitespace);
        match kind {
            "user" if name == "universal" => Ok(Self::Universal),
            "domain" if valid_name => Ok(Self::Domain(name.to_string())),
            "project" if valid_name => Ok(Self::Project(name.to_string())),
            _ => Err(err()),
        }
    }
}

impl Serialize for ScopeLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScopeLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub session_id: String,
    pub turn_id: String,
    pub extracted_at: Timestamp,
    pub source_model: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Created,
    Reinforced,
    Edited,
    Superseded,
    Merged,
    AliasAdded,
    ConflictQueued,
    ConflictResolved,
    Resolved,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub at: Timestamp,
    pub kind: ChangeKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    #[serde(rename = "_id", alias = "id")]
    pub id: BeliefId,
    pub user_id: String,
    #[serde(rename = "type")]
    pub belief_type: BeliefType,
    #[serde(default)]
    pub subtype: Subtype,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub content: String,
    pub why_it_matters: String,
    pub scope: BTreeSet<ScopeLabel>,
    #[serde(default)]
    pub epistemic_status: EpistemicStatus,
    pub confidence: f64,
    #[serde(default)]
    pub pinned: bool,
    #[serde(default)]
    pub user_edited: bool,
    #[serde(default)]
    pub superseded_by: Option<BeliefId>,
    #[serde(default)]
    pub resolved_at: Option<Timestamp>,
    #[serde(default)]
    pub reinforcement_count: u32,
    pub last_reinforced_at: Timestamp,
    pub provenance: Provenance,
    #[serde(default)]
    pub change_log: Vec<ChangeEvent>,
    #[serde(default)]
    pub expertise_domain: Option<String>,
    #[serde(default)]
    pub expertise_depth: Option<ExpertiseDepth>,
    #[serde(default)]
    pub expertise_evidence_count: Option<u32>,
    #[serde(default)]
    pub participants: Vec<BeliefId>,
}

impl Belief {
    pub fn builder(
        id: impl Into<BeliefId>,
        user_id: impl Into<String>,
        belief_type: BeliefType,
        canonical_name: impl Into<String>,
    ) -> BeliefBuilder {
        BeliefBuilder::new(id.into(), user_id.into(), belief_type, canonical_name.into())
    }

    /// Active means neither superseded nor resolved.
    pub fn is_active(&self) -> bool {
        is_active(self)
    }

    pub fn validate(&self) -> Result<(), Violations> {
        validate_belief(self)
    }

    pub fn in_scope(&self, active: &ScopeLabel) -> bool {
        self.scope.contains(&ScopeLabel::Universal) || self.scope.contains(active)
    }

    pub fn has_alias(&self, surface: &str) -> bool {
        let needle = surface.trim().to_lowercase();
        self.aliases.iter().any(|a| a.trim().to_lowercase() == needle)
    }

    /// Appends a change event. The timestamp is clamped so the log stays
    /// non-decreasing even if the caller's clock runs behind the history.
    pub fn record(&mut self, kind: ChangeKind, detail: impl Into<String>, at: Timestamp) -> Timestamp {
        let at = match self.change_log.last() {
            Some(last) if last.at > at => last.at,
            _ => at,
        };
        self.change_log.push(ChangeEvent {
            at,
            kind,
            detail: detail.into(),
        });
        at
    }

    /// Timestamp of the first change event, falling back to extraction time.
    pub fn created_at(&self) -> Timestamp {
        self.change_log
            .first()
            .map(|e| e.at)
            .unwrap_or(self.provenance.extracted_at)
    }
}

/// Activity predicate: `superseded_by` and `resolved_at` both unset.
pub fn is_active(b: &Belief) -> bool {
    b.superseded_by.is_none() && b.resolved_at.is_none()
}

pub struct BeliefBuilder {
    belief: Belief,
}

impl BeliefBuilder {
    fn new(id: BeliefId, user_id: String, belief_type: BeliefType, canonical_name: String) -> Self {
        let epoch = Timestamp::from_millis(0);
        Self {
            belief: Belief {
                id,
                user_id,
                belief_type,
                subtype: Subtype::None,
                canonical_name,
                aliases: Vec::new(),
                content: String::new(),
                why_it_matters: String::new(),
                scope: BTreeSet::new(),
                epistemic_status: EpistemicStatus::Active,
                confidence: 0.9,
                pinned: false,
                user_edited: false,
                superseded_by: None,
                resolved_at: None,
                reinforcement_count: 0,
                last_reinforced_at: epoch,
                provenance: Provenance {
                    session_id: "s-unknown".into(),
                    turn_id: "t-0".into(),
                    extracted_at: epoch,
                    source_model: "manual".into(),
                },
                change_log: Vec::new(),
                expertise_domain: None,
                expertise_depth: None,
                expertise_evidence_count: None,
                participants: Vec::new(),
            },
        }
    }

    pub fn subtype(mut self, subtype: Subtype) -> Self {
        self.belief.subtype = subtype;
        self
    }

    pub fn aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.belief.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    pub fn content(mut self, content: impl Into<String>) -> Self {
        self.belief.content = content.into();
        self
    }

    pub fn why_it_matters(mut self, why: impl Into<String>) -> Self {
        self.belief.why_it_matters = why.into();
        self
    }

    pub fn scope(mut self, scope: ScopeLabel) -> Self {
        self.belief.scope.insert(scope);
        self
    }

    pub fn status(mut self, status: EpistemicStatus) -> Self {
        self.belief.epistemic_status = status;
        self
    }

    pub fn confidence(mut self, confidence: f64) -> Self {
        self.belief.confidence = confidence;
        self
    }

    pub fn pinned(mut self, pinned: bool) -> Self {
        self.belief.pinned = pinned;
        self
    }

    pub fn reinforcement_count(mut self, count: u32) -> Self {
        self.belief.reinforcement_count = count;
        self
    }

    pub fn participants<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<BeliefId>,
    {
        self.belief.participants = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn expertise(mut self, domain: impl Into<String>, depth: ExpertiseDepth, evidence: u32) -> Self {
        self.belief.subtype = Subtype::Expertise;
        self.belief.expertise_domain = Some(domain.into());
        self.belief.expertise_depth = Some(depth);
        self.belief.expertise_evidence_count = Some(evidence);
        self
    }

    pub fn provenance(mut self, session_id: impl Into<String>, turn_id: impl Into<String>, source_model: impl Into<String>) -> Self {
        self.belief.provenance.session_id = session_id.into();
        self.belief.provenance.turn_id = turn_id.into();
        self.belief.provenance.source_model = source_model.into();
        self
    }

    /// Stamps extraction time, last reinforcement and the `created` event.
    pub fn build(mut self, at: Timestamp) -> Belief {
        self.belief.provenance.extracted_at = at;
        self.belief.last_reinforced_at = at;
        self.belief.change_log = vec![ChangeEvent {
            at,
            kind: ChangeKind::Created,
            detail: "extracted".into(),
        }];
        self.belief
    }
}

/// A single broken schema invariant.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("id is empty or contains characters outside [A-Za-z0-9_.:-]")]
    InvalidId,
    #[error("user_id is empty")]
    EmptyUserId,
    #[error("canonical_name `{0}` is not 1-5 snake_case tokens")]
    InvalidCanonicalName(String),
    #[error("confidence out of range: {0}")]
    ConfidenceOutOfRange(f64),
    #[error("epistemic_status superseded requires superseded_by and vice versa")]
    SupersessionMismatch,
    #[error("belief cannot be superseded by itself")]
    SelfSupersession,
    #[error("alias ceiling exceeded: {0} > 25")]
    AliasCeilingExceeded(usize),
    #[error("a newly extracted belief must carry 3-5 aliases, found {0}")]
    CreationAliasCount(usize),
    #[error("alias is empty")]
    EmptyAlias,
    #[error("duplicate alias `{0}`")]
    DuplicateAlias(String),
    #[error("content is empty")]
    EmptyContent,
    #[error("why_it_matters is empty")]
    EmptyWhyItMatters,
    #[error("scope set is empty")]
    EmptyScope,
    #[error("scope label `{0}` has an empty or malformed name")]
    InvalidScopeName(String),
    #[error("provenance field `{0}` is empty")]
    MissingProvenance(&'static str),
    #[error("relation beliefs need participants; other types must have none")]
    ParticipantsMismatch,
    #[error("expertise subtype is only valid on preference beliefs")]
    ExpertiseOnNonPreference,
    #[error("change_log must start with a created event")]
    ChangeLogMissingCreated,
    #[error("change_log timestamps decrease at entry {0}")]
    ChangeLogOutOfOrder(usize),
}

/// Every violation found on one belief.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("belief failed validation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn contains(&self, probe: impl Fn(&Violation) -> bool) -> bool {
        self.0.iter().any(probe)
    }
}

fn canonical_name_grammar() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z0-9]+(_[a-z0-9]+)*$").unwrap())
}

pub fn is_valid_canonical_name(name: &str) -> bool {
    canonical_name_grammar().is_match(name) && name.split('_').count() <= MAX_CANONICAL_TOKENS
}

fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | ':'))
}

/// Checks every schema invariant and returns all violations at once.
pub fn validate_belief(b: &Belief) -> Result<(), Violations> {
    let mut v = Vec::new();

    if !is_valid_id(b.id.as_str()) {
        v.push(Violation::InvalidId);
    }
    if b.user_id.trim().is_empty() {
        v.push(Violation::EmptyUserId);
    }
    if !is_valid_canonical_name(&b.canonical_name) {
        v.push(Violation::InvalidCanonicalName(b.canonical_name.clone()));
    }
    if !(0.0..=1.0).contains(&b.confidence) {
        v.push(Violation::ConfidenceOutOfRange(b.confidence));
    }
    if (b.epistemic_status == EpistemicStatus::Superseded) != b.superseded_by.is_some() {
        v.push(Violation::SupersessionMismatch);
    }
    if b.superseded_by.as_ref() == Some(&b.id) {
        v.push(Violation::SelfSupersession);
    }

    if b.aliases.len() > ALIAS_CEILING {
        v.push(Violation::AliasCeilingExceeded(b.aliases.len()));
    }
    let fresh = b.change_log.len() == 1 && b.change_log[0].kind == ChangeKind::Created;
    if fresh && !CREATION_ALIAS_RANGE.contains(&b.aliases.len()) {
        v.push(Violation::CreationAliasCount(b.aliases.len()));
    }
    let mut seen = BTreeSet::new();
    for alias in &b.aliases {
        let norm = alias.trim().to_lowercase();
        if norm.is_empty() {
            v.push(Violation::EmptyAlias);
        } else if !seen.insert(norm) {
            v.push(Violation::DuplicateAlias(alias.clone()));
        }
    }

    if b.content.trim().is_empty() {
        v.push(Violation::EmptyContent);
    }
    if b.why_it_matters.trim().is_empty() {
        v.push(Violation::EmptyWhyItMatters);
    }
    if b.scope.is_empty() {
        v.push(Violation::EmptyScope);
    }
    for label in &b.scope {
        if let Some(name) = label.name() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                v.push(Violation::InvalidScopeName(label.to_string()));
            }
        }
    }

    let p = &b.provenance;
    for (field, value) in [
        ("session_id", &p.session_id),
        ("turn_id", &p.turn_id),
        ("source_model", &p.source_model),
    ] {
        if value.trim().is_empty() {
            v.push(Violation::MissingProvenance(field));
        }
    }

    if (b.belief_type == BeliefType::Relation) == b.participants.is_empty() {
        v.push(Violation::ParticipantsMismatch);
    }
    if b.subtype == Subtype::Expertise && b.belief_type != BeliefType::Preference {
        v.push(Violation::ExpertiseOnNonPreference);
    }

    match b.change_log.first() {
        Some(first) if first.kind == ChangeKind::Created => {}
        _ => v.push(Violation::ChangeLogMissingCreated),
    }
    for (i, pair) in b.change_log.windows(2).enumerate() {
        if pair[1].at < pair[0].at {
            v.push(Violation::ChangeLogOutOfOrder(i + 1));
        }
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(Violations(v))
    }
}
