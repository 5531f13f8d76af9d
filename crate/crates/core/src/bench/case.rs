//! Benchmark case files: one JSON document per case, camelCase keys.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lifecycle::AliasProposal;
use crate::model::{Belief, BeliefId, ScopeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Alias,
    Scope,
    Fuzzy,
    TypeRouting,
    Budget,
    DesignBoundary,
    Supersession,
    Relation,
    Prelude,
    CounterSignal,
    Ranking,
    CrossUser,
    ColdStart,
    Session,
}

impl Category {
    pub const ALL: [Category; 14] = [
        Self::Alias,
        Self::Scope,
        Self::Fuzzy,
        Self::Relation,
        Self::TypeRouting,
        Self::Budget,
        Self::DesignBoundary,
        Self::Supersession,
        Self::Prelude,
        Self::CounterSignal,
        Self::Ranking,
        Self::CrossUser,
        Self::ColdStart,
        Self::Session,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Alias => "Alias resolution",
            Self::Scope => "Scope disambiguation",
            Self::Fuzzy => "Fuzzy matching",
            Self::TypeRouting => "Type routing / open questions",
            Self::Budget => "Budget eviction and capacity",
            Self::DesignBoundary => "Design boundary cases",
            Self::Supersession => "Supersession chain exclusion",
            Self::Relation => "Relation expansion",
            Self::Prelude => "Persona prelude content",
            Self::CounterSignal => "Counter-signal retrieval",
            Self::Ranking => "Ranking stability",
            Self::CrossUser => "Cross-user isolation",
            Self::ColdStart => "Cold start behavior",
            Self::Session => "Session-level noise",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Tier assertions. An absent tier is unasserted; an empty set asserts that
/// the tier comes back empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TierExpectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant_beliefs: Option<BTreeSet<BeliefId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_facts: Option<BTreeSet<BeliefId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_questions: Option<BTreeSet<BeliefId>>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub must_exclude: BTreeSet<BeliefId>,
    #[serde(default)]
    pub should_only_include: bool,
    /// Substrings that must appear in the persona prelude.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prelude_contains: Vec<String>,
    /// Substrings that must not appear in the persona prelude.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prelude_excludes: Vec<String>,
    /// The relevant tier must start with exactly these ids, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranked_prefix: Vec<BeliefId>,
}

impl TierExpectation {
    /// Carries a precision assertion on the relevant tier.
    pub fn asserts_precision(&self) -> bool {
        self.should_only_include && self.relevant_beliefs.as_ref().is_some_and(|r| !r.is_empty())
    }

    pub fn is_trivially_empty(&self) -> bool {
        self.relevant_beliefs.as_ref().is_some_and(BTreeSet::is_empty)
    }

    fn check(&self, context: &str) -> Result<(), CaseError> {
        for tier in [&self.relevant_beliefs, &self.pinned_facts, &self.open_questions]
            .into_iter()
            .flatten()
        {
            if let Some(id) = tier.intersection(&self.must_exclude).next() {
                return Err(CaseError::Invalid(format!("{context}: {id} is both expected and excluded")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftLabel {
    ImplicitReentry,
    ExplicitReentry,
    CrossSessionFormative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SupersedeStep {
    pub old: BeliefId,
    pub new: BeliefId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AliasUpdate {
    pub belief_id: BeliefId,
    pub surface_form: String,
    #[serde(default)]
    pub is_counter_signal: bool,
}

impl AliasUpdate {
    pub fn proposal(&self) -> AliasProposal {
        AliasProposal {
            belief_id: self.belief_id.clone(),
            surface_form: self.surface_form.clone(),
            observed_in: None,
            is_counter_signal: self.is_counter_signal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionTurn {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_scope: Option<ScopeLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub create_beliefs: Vec<Belief>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alias_updates: Vec<AliasUpdate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supersede: Vec<SupersedeStep>,
    #[serde(default)]
    pub expected: TierExpectation,
    /// Off-topic turn; its topic's beliefs form the drift origin.
    #[serde(default)]
    pub drift: bool,
    /// Turns with a label get a drift score.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_label: Option<DriftLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BenchCase {
    pub id: String,
    pub category: Category,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub query: String,
    pub user_id: String,
    pub active_scope: ScopeLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_beliefs: Option<usize>,
    #[serde(default)]
    pub expected: TierExpectation,
    /// Beliefs that originate from drift-turn topics.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub drift_origin: BTreeSet<BeliefId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<Vec<SessionTurn>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid case {0}")]
    Invalid(String),
}

impl BenchCase {
    pub fn is_session(&self) -> bool {
        self.session.is_some()
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        let is_session_category = self.category == Category::Session;
        if is_session_category != self.is_session() {
            return Err(CaseError::Invalid(format!(
                "{}: session category and session script must go together",
                self.id
            )));
        }
        if let Some(turns) = &self.session {
            if turns.is_empty() {
                return Err(CaseError::Invalid(format!("{}: empty session", self.id)));
            }
            if self.expected.asserts_precision() {
                return Err(CaseError::Invalid(format!(
                    "{}: session cases carry no case-level precision assertion",
                    self.id
                )));
            }
            for (i, t) in turns.iter().enumerate() {
                t.expected.check(&format!("{} turn {}", self.id, i + 1))?;
            }
        }
        self.expected.check(&self.id)
    }
}

impl FromStr for BenchCase {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let case: BenchCase = serde_json::from_str(s).map_err(|source| CaseError::Parse {
            path: "<string>".into(),
            source,
        })?;
        case.validate()?;
        Ok(case)
    }
}

/// Loads every `*.json` case in a directory, sorted by case id.
pub fn load_suite(dir: impl AsRef<Path>) -> Result<Vec<BenchCase>, CaseError> {
    let dir = dir.as_ref();
    let io = |source| CaseError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut cases = Vec::new();
    let mut seen = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|source| CaseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let case: BenchCase = serde_json::from_str(&text).map_err(|source| CaseError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        case.validate()?;
        if !seen.insert(case.id.clone()) {
            return Err(CaseError::Invalid(format!("duplicate case id {}", case.id)));
        }
        cases.push(case);
    }
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(cases)
}
