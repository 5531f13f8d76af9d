//! Inverted index over the three analyzed belief fields, with multi-path BM25
//! scoring, differential boosts and prefix-guarded fuzzy matching.
//!
//! The index is derived state: it can always be rebuilt from the store, and
//! it is updated on the store's writer path so every committed generation has
//! a matching index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_document, CleanQuery, FieldKind};
use crate::model::{Belief, BeliefId, BeliefType, ScopeLabel, Timestamp};
use crate::retrieval::HardFilters;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("unknown field `{0}` (expected canonical_name, alias_exact or alias_shingle)")]
    UnknownField(String),
}

impl FromStr for FieldKind {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical_name" | "canonical" => Ok(Self::CanonicalName),
            "alias_exact" => Ok(Self::AliasExact),
            "alias_shingle" => Ok(Self::AliasShingle),
            other => Err(IndexError::UnknownField(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boosts {
    pub canonical: f64,
    pub alias_shingle: f64,
    pub alias_exact: f64,
    pub fuzzy: f64,
}

impl Default for Boosts {
    fn default() -> Self {
        Self {
            canonical: 10.0,
            alias_shingle: 6.0,
            alias_exact: 3.0,
            fuzzy: 0.5 * 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyParams {
    /// Leading characters that must match exactly.
    pub prefix_len: usize,
    /// Query tokens at least this long may differ by one edit.
    pub one_edit_min_len: usize,
    /// Query tokens at least this long may differ by two edits.
    pub two_edit_min_len: usize,
    /// A fuzzy-only hit survives only if the fuzzy token is at least this long.
    pub hit_min_token_len: usize,
}

impl Default for FuzzyParams {
    fn default() -> Self {
        Self {
            prefix_len: 2,
            one_edit_min_len: 3,
            two_edit_min_len: 6,
            hit_min_token_len: 4,
        }
    }
}

impl FuzzyParams {
    pub fn max_edits(&self, token_len: usize) -> usize {
        if token_len >= self.two_edit_min_len {
            2
        } else if token_len >= self.one_edit_min_len {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchConfig {
    pub bm25: Bm25Params,
    pub boosts: Boosts,
    pub fuzzy: FuzzyParams,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid search configuration: {0}")]
pub struct ConfigError(pub String);

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.bm25.k1.is_finite() && self.bm25.k1 > 0.0) {
            return Err(ConfigError(format!("k1 must be positive, got {}", self.bm25.k1)));
        }
        if !(0.0..=1.0).contains(&self.bm25.b) {
            return Err(ConfigError(format!("b must be in [0, 1], got {}", self.bm25.b)));
        }
        let b = &self.boosts;
        for (name, v) in [
            ("canonical", b.canonical),
            ("alias_shingle", b.alias_shingle),
            ("alias_exact", b.alias_exact),
            ("fuzzy", b.fuzzy),
        ] {
            if !finite_nonneg(v) {
                return Err(ConfigError(format!("boost {name} must be finite and >= 0, got {v}")));
            }
        }
        let f = &self.fuzzy;
        if f.prefix_len == 0 || f.one_edit_min_len > f.two_edit_min_len {
            return Err(ConfigError("fuzzy thresholds are inconsistent".into()));
        }
        Ok(())
    }
}

/// Prefix-guarded Damerau-Levenshtein match. The allowed edit count depends
/// on the query token length; the first `prefix_len` characters must agree.
pub fn fuzzy_match(query_token: &str, index_term: &str, params: &FuzzyParams) -> bool {
    if query_token == index_term {
        return true;
    }
    let q_len = query_token.chars().count();
    let t_len = index_term.chars().count();
    let max_edits = params.max_edits(q_len);
    if max_edits == 0 || q_len.abs_diff(t_len) > max_edits {
        return false;
    }
    if q_len < params.prefix_len || t_len < params.prefix_len {
        return false;
    }
    let same_prefix = query_token
        .chars()
        .take(params.prefix_len)
        .eq(index_term.chars().take(params.prefix_len));
    same_prefix && strsim::damerau_levenshtein(query_token, index_term) <= max_edits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchPath {
    Canonical,
    AliasExact,
    AliasShingle,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub belief_id: BeliefId,
    pub score: f64,
    pub matched_paths: BTreeSet<MatchPath>,
    /// Set when the hit was added by relation expansion rather than matching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanded_from: Option<BeliefId>,
}

/// Structural attributes needed to evaluate hard filters and tie-breaks
/// without touching the full belief.
#[derive(Debug, Clone, PartialEq)]
pub struct DocMeta {
    pub user_id: String,
    pub scope: BTreeSet<ScopeLabel>,
    pub active: bool,
    pub belief_type: BeliefType,
    pub reinforcement_count: u32,
    pub last_reinforced_at: Timestamp,
}

impl DocMeta {
    fn of(b: &Belief) -> Self {
        Self {
            user_id: b.user_id.clone(),
            scope: b.scope.clone(),
            active: b.is_active(),
            belief_type: b.belief_type,
            reinforcement_count: b.reinforcement_count,
            last_reinforced_at: b.last_reinforced_at,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct FieldIndex {
    postings: BTreeMap<String, BTreeMap<BeliefId, u32>>,
    doc_terms: HashMap<BeliefId, BTreeMap<String, u32>>,
    total_len: u64,
}

impl FieldIndex {
    fn remove(&mut self, id: &BeliefId) {
        let Some(terms) = self.doc_terms.remove(id) else {
            return;
        };
        for (term, tf) in terms {
            self.total_len -= u64::from(tf);
            if let Some(list) = self.postings.get_mut(&term) {
                list.remove(id);
                if list.is_empty() {
                    self.postings.remove(&term);
                }
            }
        }
    }

    fn insert(&mut self, id: &BeliefId, tokens: &[String]) {
        let mut terms: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *terms.entry(t.clone()).or_default() += 1;
        }
        for (term, tf) in &terms {
            self.total_len += u64::from(*tf);
            self.postings
                .entry(term.clone())
                .or_default()
                .insert(id.clone(), *tf);
        }
        self.doc_terms.insert(id.clone(), terms);
    }

    fn doc_len(&self, id: &BeliefId) -> u32 {
        self.doc_terms
            .get(id)
            .map(|t| t.values().sum())
            .unwrap_or(0)
    }

    fn has_term(&self, id: &BeliefId, term: &str) -> bool {
        self.doc_terms.get(id).is_some_and(|t| t.contains_key(term))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PostingIndex {
    fields: [FieldIndex; 3],
    docs: BTreeMap<BeliefId, DocMeta>,
    generation: u64,
}

fn slot(field: FieldKind) -> usize {
    match field {
        FieldKind::CanonicalName => 0,
        FieldKind::AliasExact => 1,
        FieldKind::AliasShingle => 2,
    }
}

#[derive(Default)]
struct Accumulator {
    canonical: f64,
    exact: f64,
    shingle: f64,
    fuzzy_terms: BTreeSet<(usize, String)>,
    fuzzy_long: bool,
}

impl PostingIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build<'a>(beliefs: impl IntoIterator<Item = &'a Belief>) -> Self {
        let mut index = Self::new();
        for b in beliefs {
            index.upsert(b);
        }
        index
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn set_generation(&mut self, generation: u64) {
        self.generation = generation;
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn meta(&self, id: &BeliefId) -> Option<&DocMeta> {
        self.docs.get(id)
    }

    /// Indexes or re-indexes a belief. Inactive beliefs stay in the index
    /// (and in corpus statistics) but carry `active = false` so filters drop
    /// them.
    pub fn upsert(&mut self, belief: &Belief) {
        for f in &mut self.fields {
            f.remove(&belief.id);
        }
        // Stored beliefs are validated, so the canonical grammar holds.
        if let Ok(fields) = analyze_document(&belief.canonical_name, &belief.aliases) {
            for field in fields {
                self.fields[slot(field.field)].insert(&belief.id, &field.tokens);
            }
        }
        self.docs.insert(belief.id.clone(), DocMeta::of(belief));
    }

    fn avg_len(&self, field: usize) -> f64 {
        if self.docs.is_empty() {
            return 0.0;
        }
        self.fields[field].total_len as f64 / self.docs.len() as f64
    }

    fn term_score(&self, field: usize, term: &str, id: &BeliefId, params: &Bm25Params) -> f64 {
        let f = &self.fields[field];
        let Some(list) = f.postings.get(term) else {
            return 0.0;
        };
        let Some(&tf) = list.get(id) else {
            return 0.0;
        };
        let n = self.docs.len() as f64;
        let df = list.len() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let tf = f64::from(tf);
        let dl = f64::from(f.doc_len(id));
        let avgdl = self.avg_len(field);
        let norm = if avgdl > 0.0 {
            1.0 - params.b + params.b * dl / avgdl
        } else {
            1.0
        };
        idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    }

    /// Unboosted BM25 of one field for one candidate. Query-side term
    /// frequency is capped at one: repeated query terms count once.
    pub fn score_bm25(&self, query: &CleanQuery, field: FieldKind, candidate: &BeliefId, params: &Bm25Params) -> f64 {
        let terms: BTreeSet<&String> = match field {
            FieldKind::AliasShingle => query.phrases.iter().collect(),
            _ => query.tokens.iter().collect(),
        };
        terms
            .into_iter()
            .map(|t| self.term_score(slot(field), t, candidate, params))
            .sum()
    }

    /// Ranked hits passing `filters`. Ranking is a strict total order: score,
    /// then reinforcement count, then most recent reinforcement, then id.
    pub fn search(&self, query: &CleanQuery, filters: &HardFilters, config: &SearchConfig) -> Vec<ScoredHit> {
        if query.tokens.is_empty() || self.docs.is_empty() {
            return Vec::new();
        }
        let params = &config.bm25;
        let tokens: BTreeSet<&String> = query.tokens.iter().collect();
        let phrases: BTreeSet<&String> = query.phrases.iter().collect();
        let mut acc: BTreeMap<&BeliefId, Accumulator> = BTreeMap::new();

        for (field, terms) in [(0usize, &tokens), (1, &tokens), (2, &phrases)] {
            for term in terms.iter() {
                let Some(list) = self.fields[field].postings.get(term.as_str()) else {
                    continue;
                };
                for id in list.keys() {
                    if !self.admits(id, filters) {
                        continue;
                    }
                    let s = self.term_score(field, term, id, params);
                    let a = acc.entry(id).or_default();
                    match field {
                        0 => a.canonical += s,
                        1 => a.exact += s,
                        _ => a.shingle += s,
                    }
                }
            }
        }

        let fz = &config.fuzzy;
        for token in &tokens {
            let len = token.chars().count();
            if fz.max_edits(len) == 0 || len < fz.prefix_len {
                continue;
            }
            let prefix: String = token.chars().take(fz.prefix_len).collect();
            for field in [0usize, 1] {
                let candidates = self.fields[field]
                    .postings
                    .range(prefix.clone()..)
                    .take_while(|(term, _)| term.starts_with(&prefix));
                for (term, list) in candidates {
                    if term == *token || !fuzzy_match(token, term, fz) {
                        continue;
                    }
                    for id in list.keys() {
                        if self.fields[0].has_term(id, token)
                            || self.fields[1].has_term(id, token)
                            || !self.admits(id, filters)
                        {
                            continue;
                        }
                        let a = acc.entry(id).or_default();
                        a.fuzzy_terms.insert((field, term.clone()));
                        if len >= fz.hit_min_token_len {
                            a.fuzzy_long = true;
                        }
                    }
                }
            }
        }

        let b = &config.boosts;
        let mut hits: Vec<ScoredHit> = acc
            .into_iter()
            .filter_map(|(id, a)| {
                let fuzzy: f64 = a
                    .fuzzy_terms
                    .iter()
                    .map(|(field, term)| self.term_score(*field, term, id, params))
                    .sum();
                let exact_paths = a.canonical + a.exact + a.shingle;
                if exact_paths <= 0.0 && !a.fuzzy_long {
                    return None;
                }
                let score = b.canonical * a.canonical
                    + b.alias_exact * a.exact
                    + b.alias_shingle * a.shingle
                    + b.fuzzy * fuzzy;
                if score <= 0.0 {
                    return None;
                }
                let mut paths = BTreeSet::new();
                for (v, p) in [
                    (a.canonical, MatchPath::Canonical),
                    (a.exact, MatchPath::AliasExact),
                    (a.shingle, MatchPath::AliasShingle),
                    (fuzzy, MatchPath::Fuzzy),
                ] {
                    if v > 0.0 {
                        paths.insert(p);
                    }
                }
                Some(ScoredHit {
                    belief_id: id.clone(),
                    score,
                    matched_paths: paths,
                    expanded_from: None,
                })
            })
            .collect();
        self.rank(&mut hits);
        hits
    }

    /// Sorts hits by the ranking rule.
    pub fn rank(&self, hits: &mut [ScoredHit]) {
        hits.sort_by(|x, y| {
            let mx = self.docs.get(&x.belief_id);
            let my = self.docs.get(&y.belief_id);
            y.score
                .total_cmp(&x.score)
                .then_with(|| {
                    let rx = mx.map_or(0, |m| m.reinforcement_count);
                    let ry = my.map_or(0, |m| m.reinforcement_count);
                    ry.cmp(&rx)
                })
                .then_with(|| {
                    let tx = mx.map(|m| m.last_reinforced_at);
                    let ty = my.map(|m| m.last_reinforced_at);
                    ty.cmp(&tx)
                })
                .then_with(|| x.belief_id.cmp(&y.belief_id))
        });
    }

    fn admits(&self, id: &BeliefId, filters: &HardFilters) -> bool {
        self.docs.get(id).is_some_and(|m| filters.admits_meta(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::clean_query;
    use crate::model::{BeliefType, ScopeLabel, Timestamp};

    fn belief(id: &str, name: &str, aliases: &[&str]) -> Belief {
        Belief::builder(id, "u1", BeliefType::Entity, name)
            .aliases(aliases.iter().copied())
            .content("c")
            .why_it_matters("w")
            .scope(ScopeLabel::domain("code"))
            .build(Timestamp::from_millis(1_000))
    }

    fn code_filter() -> HardFilters {
        HardFilters::new("u1", ScopeLabel::domain("code"))
    }

    #[test]
    fn single_document_bm25() {
        let b = belief("b1", "redis", &["cache layer", "session store", "kv"]);
        let index = PostingIndex::build([&b]);
        let q = clean_query("redis");
        let s = index.score_bm25(&q, FieldKind::CanonicalName, &b.id, &Bm25Params::default());
        // tf = 1, df = 1, N = 1, dl = avgdl: idf = ln(1 + 0.5 / 1.5), tf part = 1.
        let expected = (4.0f64 / 3.0).ln();
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
    }

    #[test]
    fn no_overlap_scores_zero() {
        let b = belief("b1", "redis", &["cache layer", "session store", "kv"]);
        let index = PostingIndex::build([&b]);
        let q = clean_query("kubernetes ingress");
        for f in [FieldKind::CanonicalName, FieldKind::AliasExact, FieldKind::AliasShingle] {
            assert_eq!(index.score_bm25(&q, f, &b.id, &Bm25Params::default()), 0.0);
        }
    }

    #[test]
    fn query_term_frequency_is_capped() {
        let a = belief("b1", "redis", &["cache layer", "session store", "kv"]);
        let b = belief("b2", "postgres", &["sql", "database", "rows"]);
        let index = PostingIndex::build([&a, &b]);
        let once = clean_query("redis");
        let five = clean_query("redis redis redis redis redis");
        let p = Bm25Params::default();
        assert_eq!(
            index.score_bm25(&once, FieldKind::CanonicalName, &a.id, &p),
            index.score_bm25(&five, FieldKind::CanonicalName, &a.id, &p)
        );
        let cfg = SearchConfig::default();
        assert_eq!(
            index.search(&once, &code_filter(), &cfg),
            index.search(&five, &code_filter(), &cfg)
        );
    }

    #[test]
    fn unknown_field_name() {
        assert_eq!(
            "content".parse::<FieldKind>(),
            Err(IndexError::UnknownField("content".into()))
        );
        assert_eq!("alias_exact".parse::<FieldKind>(), Ok(FieldKind::AliasExact));
    }

    #[test]
    fn fuzzy_examples() {
        let p = FuzzyParams::default();
        assert!(fuzzy_match("kuberentes", "kubernetes", &p));
        assert!(!fuzzy_match("pedis", "redis", &p));
        assert!(fuzzy_match("redis", "redis", &p));
        assert!(fuzzy_match("fastfy", "fastify", &p));
        // two-character tokens allow no edits
        assert!(!fuzzy_match("ab", "ac", &p));
        // three-to-five allows one edit
        assert!(fuzzy_match("redsi", "redis", &p));
        assert!(!fuzzy_match("rdsi", "redis", &p));
    }

    #[test]
    fn superseded_is_filtered_not_removed() {
        let mut a = belief("b1", "redis", &["cache layer", "session store", "kv"]);
        a.epistemic_status = crate::model::EpistemicStatus::Superseded;
        a.superseded_by = Some("b2".into());
        let b = belief("b2", "postgres", &["sql", "database", "rows"]);
        let index = PostingIndex::build([&a, &b]);
        assert_eq!(index.len(), 2);
        let hits = index.search(&clean_query("redis"), &code_filter(), &SearchConfig::default());
        assert!(hits.is_empty());
    }

    #[test]
    fn empty_query() {
        let b = belief("b1", "redis", &["cache layer", "session store", "kv"]);
        let index = PostingIndex::build([&b]);
        assert!(index
            .search(&clean_query(""), &code_filter(), &SearchConfig::default())
            .is_empty());
    }

    #[test]
    fn fuzzy_only_hit_needs_long_token() {
        let b = belief("b1", "sentry", &["crash reports", "alerting", "apm"]);
        let index = PostingIndex::build([&b]);
        let cfg = SearchConfig::default();
        let hits = index.search(&clean_query("sentyr"), &code_filter(), &cfg);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].matched_paths, BTreeSet::from([MatchPath::Fuzzy]));

        // a three-letter token may fuzz by one edit but cannot carry a hit alone
        let c = belief("b2", "apm_tool", &["apm", "tracing", "spans"]);
        let index = PostingIndex::build([&c]);
        assert!(index.search(&clean_query("apx"), &code_filter(), &cfg).is_empty());
    }

    #[test]
    fn shingle_path() {
        let b = belief("b1", "auth_service", &["session backend", "auth redis", "login"]);
        let index = PostingIndex::build([&b]);
        let hits = index.search(&clean_query("the session backend graph"), &code_filter(), &SearchConfig::default());
        assert!(hits[0].matched_paths.contains(&MatchPath::AliasShingle));
    }

    #[test]
    fn tie_break_by_reinforcement_then_id() {
        let mut a = belief("b-a", "widget", &["gizmo", "thing one", "part"]);
        let mut b = belief("b-b", "widget", &["gizmo", "thing one", "part"]);
        let c = belief("b-c", "widget", &["gizmo", "thing one", "part"]);
        a.reinforcement_count = 1;
        b.reinforcement_count = 5;
        let index = PostingIndex::build([&a, &b, &c]);
        let hits = index.search(&clean_query("widget"), &code_filter(), &SearchConfig::default());
        let order: Vec<_> = hits.iter().map(|h| h.belief_id.as_str()).collect();
        assert_eq!(order, ["b-b", "b-a", "b-c"]);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let mut c = SearchConfig::default();
        c.bm25.b = 1.5;
        assert!(c.validate().is_err());
        let mut c = SearchConfig::default();
        c.boosts.fuzzy = f64::NAN;
        assert!(c.validate().is_err());
    }
}
