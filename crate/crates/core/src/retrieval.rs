//! Tiered context assembly: hard filters, pinned and open-question routing,
//! ranked text search, one-hop relation expansion, budget and the persona
//! prelude.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{clean_query, tokenize};
use crate::index::{DocMeta, ScoredHit, SearchConfig};
use crate::model::{Belief, BeliefId, BeliefType, EpistemicStatus, ScopeLabel, Subtype};
use crate::store::StoreView;

/// Default relevant-tier budget for the service and CLI.
pub const DEFAULT_MAX_BELIEFS: usize = 10;

const MAX_CHAIN_HOPS: usize = 1024;

/// Structural constraints evaluated with scoring, never after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardFilters {
    pub user_id: String,
    pub active_scope: ScopeLabel,
    #[serde(default = "yes")]
    pub require_active: bool,
}

fn yes() -> bool {
    true
}

impl HardFilters {
    pub fn new(user_id: impl Into<String>, active_scope: ScopeLabel) -> Self {
        Self {
            user_id: user_id.into(),
            active_scope,
            require_active: true,
        }
    }

    pub fn admits(&self, b: &Belief) -> bool {
        b.user_id == self.user_id
            && b.in_scope(&self.active_scope)
            && (!self.require_active || b.is_active())
    }

    pub(crate) fn admits_meta(&self, m: &DocMeta) -> bool {
        m.user_id == self.user_id
            && (m.scope.contains(&ScopeLabel::Universal) || m.scope.contains(&self.active_scope))
            && (!self.require_active || m.active)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinPolicy {
    /// Inferred beliefs are pinned only when explicitly pinned.
    pub inferred_requires_pin: bool,
}

impl Default for PinPolicy {
    fn default() -> Self {
        Self {
            inferred_requires_pin: true,
        }
    }
}

impl PinPolicy {
    /// Whether a belief that already passed the hard filters belongs to the
    /// pinned tier. Open questions are routed separately.
    pub fn is_pinned(&self, b: &Belief) -> bool {
        if b.belief_type == BeliefType::OpenQuestion {
            return false;
        }
        match b.epistemic_status {
            EpistemicStatus::Active => b.pinned || b.belief_type == BeliefType::Preference,
            EpistemicStatus::Inferred => {
                b.pinned || (!self.inferred_requires_pin && b.belief_type == BeliefType::Preference)
            }
            EpistemicStatus::Exploratory | EpistemicStatus::Superseded => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub search: SearchConfig,
    pub pins: PinPolicy,
    pub expand_relations: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            pins: PinPolicy::default(),
            expand_relations: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub persona_prelude: String,
    pub pinned_facts: Vec<Belief>,
    pub relevant_beliefs: Vec<Belief>,
    /// Score and match paths for each entry of `relevant_beliefs`, same order.
    pub relevant_hits: Vec<ScoredHit>,
    pub open_questions: Vec<Belief>,
    pub generation: u64,
    pub latency_ms: f64,
}

impl RetrievalContext {
    pub fn ids(beliefs: &[Belief]) -> Vec<BeliefId> {
        beliefs.iter().map(|b| b.id.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.persona_prelude.is_empty()
            && self.pinned_facts.is_empty()
            && self.relevant_beliefs.is_empty()
            && self.open_questions.is_empty()
    }

    /// Every belief across all three tiers.
    pub fn all(&self) -> impl Iterator<Item = &Belief> {
        self.pinned_facts
            .iter()
            .chain(&self.relevant_beliefs)
            .chain(&self.open_questions)
    }

    /// Tier disjointness and type routing.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for b in self.all() {
            if !seen.insert(&b.id) {
                return Err(format!("{} appears in more than one tier", b.id));
            }
        }
        if let Some(b) = self
            .pinned_facts
            .iter()
            .chain(&self.relevant_beliefs)
            .find(|b| b.belief_type == BeliefType::OpenQuestion)
        {
            return Err(format!("open question {} outside the question tier", b.id));
        }
        if let Some(b) = self
            .open_questions
            .iter()
            .find(|b| b.belief_type != BeliefType::OpenQuestion)
        {
            return Err(format!("{} in the question tier is not an open question", b.id));
        }
        Ok(())
    }
}

/// Follows `superseded_by` to the end of the chain. Returns `None` for
/// unknown ids and for chains that loop or run away.
pub fn terminal<'a>(view: &'a StoreView, id: &BeliefId) -> Option<&'a Belief> {
    let mut current = view.get(id)?;
    for _ in 0..MAX_CHAIN_HOPS {
        match &current.superseded_by {
            None => return Some(current),
            Some(next) => current = view.get(next)?,
        }
    }
    None
}

/// Tiers that already own a belief id, used to keep tiers disjoint.
struct Routed {
    pinned: BTreeSet<BeliefId>,
    questions: Vec<Belief>,
    question_ids: BTreeSet<BeliefId>,
}

impl Routed {
    fn add_question(&mut self, b: &Belief) {
        if self.question_ids.insert(b.id.clone()) {
            self.questions.push(b.clone());
        }
    }
}

/// One-hop join from relation hits to their participants. Participants are
/// placed directly after the relation that produced them; open-question
/// participants go to the question tier instead.
fn expand_relations(view: &StoreView, hits: Vec<ScoredHit>, filters: &HardFilters, routed: &mut Routed) -> Vec<ScoredHit> {
    let mut out = Vec::with_capacity(hits.len());
    let mut placed: BTreeSet<BeliefId> = BTreeSet::new();
    for hit in hits {
        if !placed.insert(hit.belief_id.clone()) {
            continue;
        }
        let relation = view
            .get(&hit.belief_id)
            .filter(|b| b.belief_type == BeliefType::Relation)
            .map(|b| b.participants.clone());
        let source = hit.belief_id.clone();
        out.push(hit);
        for pid in relation.unwrap_or_default() {
            let Some(p) = terminal(view, &pid) else {
                log::warn!("relation {source} names unknown participant {pid}");
                continue;
            };
            if !filters.admits(p) {
                continue;
            }
            if p.belief_type == BeliefType::OpenQuestion {
                routed.add_question(p);
                continue;
            }
            if routed.pinned.contains(&p.id) || !placed.insert(p.id.clone()) {
                continue;
            }
            out.push(ScoredHit {
                belief_id: p.id.clone(),
                score: 0.0,
                matched_paths: BTreeSet::new(),
                expanded_from: Some(source.clone()),
            });
        }
    }
    out
}

/// Relevant-tier capacity once the pinned tier has taken its share. Pinned
/// facts are never truncated.
pub fn apply_budget(mut hits: Vec<ScoredHit>, max_beliefs: usize, pinned: usize) -> Vec<ScoredHit> {
    hits.truncate(max_beliefs.saturating_sub(pinned));
    hits
}

/// Runs the full retrieval pipeline against one store generation.
pub fn retrieve(view: &StoreView, query: &str, filters: &HardFilters, max_beliefs: usize, config: &RetrievalConfig) -> RetrievalContext {
    let started = Instant::now();
    let cleaned = clean_query(query);

    let mut pinned_facts = Vec::new();
    let mut routed = Routed {
        pinned: BTreeSet::new(),
        questions: Vec::new(),
        question_ids: BTreeSet::new(),
    };
    for b in view.beliefs_of(&filters.user_id) {
        if !filters.admits(b) {
            continue;
        }
        if b.belief_type == BeliefType::OpenQuestion {
            if b.pinned {
                routed.add_question(b);
            }
        } else if config.pins.is_pinned(b) {
            routed.pinned.insert(b.id.clone());
            pinned_facts.push(b.clone());
        }
    }

    let hits: Vec<ScoredHit> = view
        .index()
        .search(&cleaned, filters, &config.search)
        .into_iter()
        .filter(|h| {
            !routed.pinned.contains(&h.belief_id)
                && !routed.question_ids.contains(&h.belief_id)
                && view
                    .get(&h.belief_id)
                    .is_some_and(|b| b.belief_type != BeliefType::OpenQuestion)
        })
        .collect();
    let hits = if config.expand_relations {
        expand_relations(view, hits, filters, &mut routed)
    } else {
        hits
    };
    let hits = apply_budget(hits, max_beliefs, pinned_facts.len());
    let relevant_beliefs = hits
        .iter()
        .filter_map(|h| view.get(&h.belief_id).cloned())
        .collect();

    let persona_prelude = build_prelude(view, &filters.user_id);
    RetrievalContext {
        persona_prelude,
        pinned_facts,
        relevant_beliefs,
        relevant_hits: hits,
        open_questions: routed.questions,
        generation: view.generation(),
        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
    }
}

const AMBIGUITY_TERMS: [&str; 6] = [
    "ambiguity",
    "ambiguous",
    "clarify",
    "clarification",
    "assumption",
    "assumptions",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreludeSection {
    CommunicationStyle,
    WorkingPreferences,
    AmbiguityHandling,
}

impl PreludeSection {
    pub fn title(&self) -> &'static str {
        match self {
            Self::CommunicationStyle => "Communication style",
            Self::WorkingPreferences => "Working preferences",
            Self::AmbiguityHandling => "Ambiguity handling",
        }
    }

    /// Section for an active universal preference.
    pub fn of(b: &Belief) -> Self {
        if tokenize(&b.canonical_name.replace('_', " "))
            .iter()
            .any(|t| AMBIGUITY_TERMS.contains(&t.as_str()))
        {
            Self::AmbiguityHandling
        } else if b.subtype == Subtype::Style {
            Self::CommunicationStyle
        } else {
            Self::WorkingPreferences
        }
    }
}

fn prelude_line(b: &Belief) -> String {
    let mut line = format!("- {}", b.content.trim());
    if b.subtype == Subtype::Expertise {
        let domain = b.expertise_domain.as_deref().unwrap_or("general");
        match b.expertise_depth {
            Some(depth) => {
                let depth = serde_json::to_value(depth)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                let _ = write!(line, " [expertise: {domain}, {depth}]");
            }
            None => {
                let _ = write!(line, " [expertise: {domain}]");
            }
        }
    }
    let _ = write!(line, " Why: {}", b.why_it_matters.trim());
    line
}

/// Standing persona text from the user's active universal preferences.
/// Independent of any query; empty when there is nothing to say.
pub fn build_prelude(view: &StoreView, user_id: &str) -> String {
    let mut entries: Vec<&Belief> = view
        .beliefs_of(user_id)
        .filter(|b| {
            b.is_active()
                && b.belief_type == BeliefType::Preference
                && b.scope.contains(&ScopeLabel::Universal)
                && b.epistemic_status != EpistemicStatus::Exploratory
        })
        .collect();
    entries.sort_by(|a, b| a.canonical_name.cmp(&b.canonical_name).then_with(|| a.id.cmp(&b.id)));

    let mut out = String::new();
    for section in [
        PreludeSection::CommunicationStyle,
        PreludeSection::WorkingPreferences,
        PreludeSection::AmbiguityHandling,
    ] {
        let lines: Vec<String> = entries
            .iter()
            .filter(|b| PreludeSection::of(b) == section)
            .map(|b| prelude_line(b))
            .collect();
        if lines.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "## {}", section.title());
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
    }
    out
}
