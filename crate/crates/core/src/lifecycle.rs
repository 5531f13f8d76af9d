//! Write-side lifecycle: merge-or-conflict, alias enrichment and compaction.
//! Every operation runs as one store transaction and appends exactly one
//! change event to each belief it touches.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Belief, BeliefId, ChangeKind, EpistemicStatus, Provenance, ALIAS_CEILING};
use crate::store::{Result, Store, StoreError, WriteTx};

/// Incoming beliefs below this confidence are skipped outright.
pub const SKIP_CONFIDENCE: f64 = 0.4;
/// Shared aliases needed before two differently named beliefs are merged.
pub const COMPACTION_ALIAS_OVERLAP: usize = 2;

const ALIAS_PREFIX: &str = "+alias ";
const COUNTER_PREFIX: &str = "+counter_signal ";
const EVICT_MARK: &str = "; -alias ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeAction {
    InsertNew,
    ReinforceExisting,
    QueueConflict,
    SkipLowConfidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeVerdict {
    pub action: MergeAction,
    pub target: Option<BeliefId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflict_id: Option<String>,
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn alias_keys(b: &Belief) -> BTreeSet<String> {
    b.aliases.iter().map(|a| normalize(a)).collect()
}

/// Stored active belief that `incoming` restates or contradicts. Canonical
/// name matches win over alias overlap; ties go to the smallest id.
fn find_match<'a>(tx: &'a WriteTx<'_>, incoming: &Belief) -> Option<&'a Belief> {
    let keys = alias_keys(incoming);
    let mut by_alias = None;
    for b in tx.beliefs() {
        if b.user_id != incoming.user_id || b.belief_type != incoming.belief_type || !b.is_active() {
            continue;
        }
        if b.canonical_name == incoming.canonical_name {
            return Some(b);
        }
        if by_alias.is_none() && !alias_keys(b).is_disjoint(&keys) {
            by_alias = Some(b);
        }
    }
    by_alias
}

/// Inserts, reinforces, queues a conflict or skips, depending on what the
/// store already holds.
pub fn merge(store: &Store, incoming: Belief) -> Result<MergeVerdict> {
    incoming.validate().map_err(|violations| StoreError::Invalid {
        id: incoming.id.clone(),
        violations,
    })?;
    if incoming.confidence < SKIP_CONFIDENCE {
        return Ok(MergeVerdict {
            action: MergeAction::SkipLowConfidence,
            target: None,
            conflict_id: None,
        });
    }
    store.write(|tx| {
        let Some(existing) = find_match(tx, &incoming) else {
            tx.insert(incoming.clone())?;
            return Ok(MergeVerdict {
                action: MergeAction::InsertNew,
                target: None,
                conflict_id: None,
            });
        };
        let target = existing.id.clone();
        let agrees = existing.canonical_name == incoming.canonical_name
            && normalize(&existing.content) == normalize(&incoming.content);
        if agrees {
            let now = tx.now();
            let p = &incoming.provenance;
            let detail = format!("restated in {}/{}", p.session_id, p.turn_id);
            tx.update(&target, |b| {
                b.reinforcement_count += 1;
                b.last_reinforced_at = b.record(ChangeKind::Reinforced, detail, now);
            })?;
            Ok(MergeVerdict {
                action: MergeAction::ReinforceExisting,
                target: Some(target),
                conflict_id: None,
            })
        } else {
            let record = tx.queue_conflict(&target, incoming.clone())?;
            Ok(MergeVerdict {
                action: MergeAction::QueueConflict,
                target: Some(target),
                conflict_id: Some(record.id),
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasProposal {
    pub belief_id: BeliefId,
    pub surface_form: String,
    #[serde(default)]
    pub observed_in: Option<Provenance>,
    #[serde(default)]
    pub is_counter_signal: bool,
}

impl AliasProposal {
    pub fn new(belief_id: impl Into<BeliefId>, surface_form: impl Into<String>) -> Self {
        Self {
            belief_id: belief_id.into(),
            surface_form: surface_form.into(),
            observed_in: None,
            is_counter_signal: false,
        }
    }

    pub fn counter_signal(mut self) -> Self {
        self.is_counter_signal = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichOutcome {
    /// Belief that actually received the alias.
    pub belief_id: BeliefId,
    pub added: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evicted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redirected_from: Option<BeliefId>,
}

/// Aliases added by enrichment, oldest first, with their counter-signal flag.
fn enriched_aliases(b: &Belief) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for e in &b.change_log {
        if e.kind != ChangeKind::AliasAdded {
            continue;
        }
        let (body, counter) = if let Some(rest) = e.detail.strip_prefix(ALIAS_PREFIX) {
            (rest, false)
        } else if let Some(rest) = e.detail.strip_prefix(COUNTER_PREFIX) {
            (rest, true)
        } else {
            continue;
        };
        let added = body.split_once(EVICT_MARK).map_or(body, |(a, _)| a);
        out.push((added.to_string(), counter));
    }
    out
}

/// Oldest enrichment-added alias that is still present and not a counter
/// signal. Extraction-time aliases are never evicted.
fn eviction_candidate(b: &Belief) -> Option<String> {
    enriched_aliases(b)
        .into_iter()
        .filter(|(_, counter)| !counter)
        .map(|(a, _)| a)
        .find(|a| b.aliases.iter().any(|x| x == a))
}

fn terminal_id(tx: &WriteTx<'_>, id: &BeliefId) -> Result<BeliefId> {
    let mut current = tx.get(id).ok_or_else(|| StoreError::NotFound(id.clone()))?;
    let mut hops = 0;
    while let Some(next) = &current.superseded_by {
        current = tx.get(next).ok_or_else(|| StoreError::NotFound(next.clone()))?;
        hops += 1;
        if hops > 1024 {
            return Err(StoreError::NotActive(id.clone()));
        }
    }
    Ok(current.id.clone())
}

/// Adds an observed surface form to a belief. Proposals against superseded
/// beliefs land on the terminal of their chain.
pub fn enrich_alias(store: &Store, p: &AliasProposal) -> Result<EnrichOutcome> {
    store.write(|tx| enrich_in(tx, p))
}

pub fn enrich_in(tx: &mut WriteTx<'_>, p: &AliasProposal) -> Result<EnrichOutcome> {
    let surface = p.surface_form.trim();
    if surface.is_empty() || crate::analysis::tokenize(surface).is_empty() {
        return Err(StoreError::EmptyAlias);
    }
    let target = terminal_id(tx, &p.belief_id)?;
    let redirected_from = (target != p.belief_id).then(|| p.belief_id.clone());
    let b = tx.get(&target).expect("terminal exists");
    if !b.is_active() {
        return Err(StoreError::NotActive(target));
    }
    if b.has_alias(surface) {
        return Ok(EnrichOutcome {
            belief_id: target,
            added: false,
            evicted: None,
            redirected_from,
        });
    }
    let evicted = if b.aliases.len() >= ALIAS_CEILING {
        Some(eviction_candidate(b).ok_or_else(|| StoreError::AliasCeiling(target.clone()))?)
    } else {
        None
    };
    let prefix = if p.is_counter_signal { COUNTER_PREFIX } else { ALIAS_PREFIX };
    let mut detail = format!("{prefix}{surface}");
    if let Some(e) = &evicted {
        detail.push_str(EVICT_MARK);
        detail.push_str(e);
    }
    let now = tx.now();
    let surface = surface.to_string();
    let ev = evicted.clone();
    tx.update(&target, move |b| {
        if let Some(e) = &ev {
            b.aliases.retain(|a| a != e);
        }
        b.aliases.push(surface);
        b.record(ChangeKind::AliasAdded, detail, now);
    })?;
    Ok(EnrichOutcome {
        belief_id: target,
        added: true,
        evicted,
        redirected_from,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedPair {
    pub survivor: BeliefId,
    pub absorbed: BeliefId,
    pub aliases_added: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases_dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompactionReport {
    pub user_id: String,
    pub merged: Vec<MergedPair>,
    pub aliases_unioned: usize,
    pub beliefs_retired: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<u64>,
}

impl CompactionReport {
    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    /// Absorbed id to final survivor, following merges of survivors.
    pub fn substitutions(&self) -> BTreeMap<BeliefId, BeliefId> {
        let direct: BTreeMap<&BeliefId, &BeliefId> = self.merged.iter().map(|m| (&m.absorbed, &m.survivor)).collect();
        direct
            .keys()
            .map(|&from| {
                let mut to = direct[from];
                while let Some(next) = direct.get(to) {
                    to = next;
                }
                ((*from).clone(), to.clone())
            })
            .collect()
    }
}

fn status_rank(s: EpistemicStatus) -> u8 {
    match s {
        EpistemicStatus::Active => 3,
        EpistemicStatus::Inferred => 2,
        EpistemicStatus::Exploratory => 1,
        EpistemicStatus::Superseded => 0,
    }
}

fn is_duplicate_pair(a: &Belief, b: &Belief) -> bool {
    a.user_id == b.user_id
        && a.belief_type == b.belief_type
        && a.scope == b.scope
        && (a.canonical_name == b.canonical_name
            || alias_keys(a).intersection(&alias_keys(b)).count() >= COMPACTION_ALIAS_OVERLAP)
}

/// Survivor first: more reinforcement, then earlier extraction, then id.
fn order_pair<'a>(a: &'a Belief, b: &'a Belief) -> (&'a Belief, &'a Belief) {
    let a_first = b
        .reinforcement_count
        .cmp(&a.reinforcement_count)
        .then(a.provenance.extracted_at.cmp(&b.provenance.extracted_at))
        .then(a.id.cmp(&b.id))
        .is_lt();
    if a_first {
        (a, b)
    } else {
        (b, a)
    }
}

fn next_pair(tx: &WriteTx<'_>, user_id: &str) -> Option<(BeliefId, BeliefId)> {
    let blocked: BTreeSet<&BeliefId> = tx
        .conflicts()
        .into_iter()
        .filter(|c| c.is_pending())
        .map(|c| &c.existing_id)
        .collect();
    let live: Vec<&Belief> = tx
        .beliefs()
        .into_iter()
        .filter(|b| b.user_id == user_id && b.is_active() && !blocked.contains(&b.id))
        .collect();
    for (i, a) in live.iter().enumerate() {
        for b in &live[i + 1..] {
            if is_duplicate_pair(a, b) {
                let (s, x) = order_pair(a, b);
                return Some((s.id.clone(), x.id.clone()));
            }
        }
    }
    None
}

fn absorb(tx: &mut WriteTx<'_>, survivor: &BeliefId, absorbed: &BeliefId) -> Result<MergedPair> {
    let s = tx.get(survivor).cloned().expect("survivor exists");
    let x = tx.get(absorbed).cloned().expect("absorbed exists");

    let mut aliases = s.aliases.clone();
    let mut keys = alias_keys(&s);
    let mut added = Vec::new();
    let name_alias = x.canonical_name.replace('_', " ");
    let carried = (x.canonical_name != s.canonical_name).then_some(name_alias);
    for a in x.aliases.iter().cloned().chain(carried) {
        if keys.insert(normalize(&a)) {
            aliases.push(a.clone());
            added.push(a);
        }
    }

    let mut dropped = Vec::new();
    if aliases.len() > ALIAS_CEILING {
        let evictable: Vec<String> = enriched_aliases(&s)
            .into_iter()
            .filter(|(_, counter)| !counter)
            .map(|(a, _)| a)
            .collect();
        for e in evictable {
            if aliases.len() <= ALIAS_CEILING {
                break;
            }
            if let Some(pos) = aliases.iter().position(|a| *a == e) {
                dropped.push(aliases.remove(pos));
            }
        }
        while aliases.len() > ALIAS_CEILING {
            dropped.push(aliases.pop().expect("non-empty"));
        }
        added.retain(|a| !dropped.contains(a));
    }

    let mut participants = s.participants.clone();
    for p in &x.participants {
        if !participants.contains(p) && p != survivor {
            participants.push(p.clone());
        }
    }

    let now = tx.now();
    let detail = format!("absorbed {absorbed}: +{} aliases", added.len());
    tx.update(survivor, |b| {
        b.aliases = aliases;
        b.participants = participants;
        b.reinforcement_count = s.reinforcement_count.saturating_add(x.reinforcement_count);
        b.last_reinforced_at = s.last_reinforced_at.max(x.last_reinforced_at);
        b.pinned = s.pinned || x.pinned;
        b.confidence = s.confidence.max(x.confidence);
        if status_rank(x.epistemic_status) > status_rank(s.epistemic_status) {
            b.epistemic_status = x.epistemic_status;
        }
        b.record(ChangeKind::Merged, detail, now);
    })?;
    tx.supersede(absorbed, survivor)?;
    Ok(MergedPair {
        survivor: survivor.clone(),
        absorbed: absorbed.clone(),
        aliases_added: added,
        aliases_dropped: dropped,
    })
}

/// Merges duplicate beliefs of one user until none remain. Beliefs named by
/// a pending conflict are left alone.
pub fn compact(store: &Store, user_id: &str) -> Result<CompactionReport> {
    store.write(|tx| {
        let mut report = CompactionReport {
            user_id: user_id.to_string(),
            ..CompactionReport::default()
        };
        while let Some((survivor, absorbed)) = next_pair(tx, user_id) {
            let pair = absorb(tx, &survivor, &absorbed)?;
            report.aliases_unioned += pair.aliases_added.len();
            report.beliefs_retired += 1;
            report.merged.push(pair);
        }
        if !report.is_empty() {
            report.generation = Some(tx.generation());
        }
        Ok(report)
    })
}
