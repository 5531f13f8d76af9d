//! Generators shared by the property and acceptance tests.
#![allow(dead_code)]

use belief_store::bench::build_seed_corpus;
use belief_store::{Belief, BeliefId, BeliefType, ScopeLabel, Store, Timestamp};
use rand::seq::SliceRandom;
use rand::Rng;

pub mod bm25;
pub mod harness;

/// Words with pairwise distinct two-letter prefixes, so prefix-guarded fuzzy
/// matching can never fire between two different words.
pub const DISTINCT: [&str; 16] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet", "kilo", "lima", "mike",
    "november", "oscar", "papa",
];

/// Vocabulary for randomized corpora: short names, near-miss spellings and
/// shared words, so fuzzy and shingle paths are exercised.
pub const VOCAB: [&str; 24] = [
    "redis", "cache", "kubernetes", "k8s", "helm", "postgres", "mongo", "auth", "session", "backend", "lint", "biome",
    "eslint", "prettier", "pipeline", "deploy", "queue", "worker", "chapter", "draft", "style", "guide", "review",
    "metrics",
];

pub const NOISE: [&str; 10] = [
    "how", "do", "i", "the", "why", "is", "slow", "again", "kuberentes", "pedis",
];

pub fn t0() -> Timestamp {
    Timestamp::from_millis(1_767_600_000_000)
}

pub fn belief(
    id: &str,
    user: &str,
    ty: BeliefType,
    canonical: &str,
    aliases: &[&str],
    scope: ScopeLabel,
    at: Timestamp,
) -> Belief {
    Belief::builder(id, user, ty, canonical)
        .aliases(aliases.iter().copied())
        .content(format!("Content of {canonical}."))
        .why_it_matters(format!("Why {canonical} matters."))
        .scope(scope)
        .build(at)
}

pub fn entity(id: &str, canonical: &str, aliases: &[&str]) -> Belief {
    belief(id, "u1", BeliefType::Entity, canonical, aliases, ScopeLabel::Universal, t0())
}

fn phrase<R: Rng>(rng: &mut R, words: &[&str], max_len: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| words.choose(rng).unwrap().to_string()).collect()
}

/// 3-5 distinct aliases of 1-2 words each.
pub fn aliases<R: Rng>(rng: &mut R, words: &[&str]) -> Vec<String> {
    let want = rng.gen_range(3..=5);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..50 {
        if out.len() == want {
            break;
        }
        let a = phrase(rng, words, 2).join(" ");
        if !out.contains(&a) {
            out.push(a);
        }
    }
    while out.len() < 3 {
        out.push(format!("filler {}", out.len()));
    }
    out
}

pub fn canonical<R: Rng>(rng: &mut R, words: &[&str]) -> String {
    let mut parts = phrase(rng, words, 3);
    parts.dedup();
    parts
        .join("_")
        .replace(|c: char| !c.is_ascii_alphanumeric() && c != '_', "")
}

pub const SCOPES: [&str; 4] = ["user:universal", "domain:code", "domain:writing", "project:atlas"];
pub const USERS: [&str; 2] = ["u-a", "u-b"];

pub fn scope(s: &str) -> ScopeLabel {
    s.parse().unwrap()
}

/// A random multi-scope, two-user corpus of plain beliefs with mixed types,
/// statuses and pins. Every id is unique.
pub fn random_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<Belief> {
    use belief_store::EpistemicStatus::*;
    let types = [BeliefType::Preference, BeliefType::Decision, BeliefType::Entity, BeliefType::OpenQuestion];
    (0..n)
        .map(|i| {
            let user = *USERS.choose(rng).unwrap();
            let ty = *types.choose(rng).unwrap();
            let mut b = Belief::builder(format!("b{i}"), user, ty, canonical(rng, &VOCAB))
                .aliases(aliases(rng, &VOCAB))
                .content(format!("belief {i}"))
                .why_it_matters("context")
                .scope(scope(SCOPES.choose(rng).unwrap()))
                .status(*[Active, Active, Inferred, Exploratory].choose(rng).unwrap())
                .pinned(rng.gen_bool(0.2))
                .reinforcement_count(rng.gen_range(0..20))
                .build(t0().plus_millis(i as i64 * 1000));
            if rng.gen_bool(0.3) {
                let extra = scope(SCOPES.choose(rng).unwrap());
                b.scope.insert(extra);
            }
            b
        })
        .collect()
}

/// Queries built from corpus vocabulary plus noise and misspellings.
pub fn random_query<R: Rng>(rng: &mut R) -> String {
    let mut words = phrase(rng, &VOCAB, 4);
    if rng.gen_bool(0.5) {
        words.insert(0, NOISE.choose(rng).unwrap().to_string());
    }
    words.shuffle(rng);
    words.join(" ")
}

pub fn store_with(beliefs: &[Belief]) -> Store {
    let store = Store::in_memory();
    store
        .write(|tx| {
            for b in beliefs {
                tx.insert(b.clone())?;
            }
            Ok(())
        })
        .unwrap();
    store
}

pub fn seed_store() -> Store {
    store_with(&build_seed_corpus())
}

pub fn ids<'a>(it: impl IntoIterator<Item = &'a Belief>) -> Vec<BeliefId> {
    it.into_iter().map(|b| b.id.clone()).collect()
}

/// A random corpus plus a 3-hop chain (4 beliefs, first three superseded) for
/// user `u-a`, and a relation whose participants include chain members.
pub fn chain_corpus<R: Rng>(rng: &mut R) -> (Vec<Belief>, Vec<BeliefId>) {
    use belief_store::{ChangeKind, EpistemicStatus};
    let n = rng.gen_range(10..25);
    let mut corpus = random_corpus(rng, n);
    let chain_scope = scope(SCOPES.choose(rng).unwrap());
    let chain_ids: Vec<BeliefId> = (0..4).map(|i| BeliefId::new(format!("chain{i}"))).collect();
    let shared = VOCAB.choose(rng).unwrap().to_string();
    for (i, id) in chain_ids.iter().enumerate() {
        let mut al = aliases(rng, &VOCAB);
        // Chain members share one alias word, so a query can hit all four.
        if !al.contains(&shared) {
            al[0] = shared.clone();
        }
        let at = t0().plus_millis(100_000 + i as i64 * 1000);
        let mut b = Belief::builder(id.clone(), "u-a", BeliefType::Decision, canonical(rng, &VOCAB))
            .aliases(al)
            .content(format!("chain step {i}"))
            .why_it_matters("history")
            .scope(chain_scope.clone())
            .pinned(rng.gen_bool(0.3))
            .build(at);
        if i < 3 {
            let next = chain_ids[i + 1].clone();
            b.epistemic_status = EpistemicStatus::Superseded;
            b.record(ChangeKind::Superseded, format!("superseded by {next}"), at.plus_millis(10_000));
            b.superseded_by = Some(next);
        }
        corpus.push(b);
    }
    let mut participants = vec![chain_ids[rng.gen_range(0..3)].clone()];
    if let Some(other) = corpus.choose(rng) {
        if !participants.contains(&other.id) {
            participants.push(other.id.clone());
        }
    }
    corpus.push(
        Belief::builder("rel", "u-a", BeliefType::Relation, canonical(rng, &VOCAB))
            .aliases(aliases(rng, &VOCAB))
            .content("relation")
            .why_it_matters("joins")
            .scope(chain_scope)
            .participants(participants)
            .build(t0()),
    );
    (corpus, chain_ids)
}

pub fn chain_query<R: Rng>(rng: &mut R, corpus: &[Belief], chain: &[BeliefId]) -> String {
    if rng.gen_bool(0.5) {
        let id = chain.choose(rng).unwrap();
        let b = corpus.iter().find(|b| &b.id == id).unwrap();
        let mut q = b.aliases.choose(rng).unwrap().clone();
        if rng.gen_bool(0.5) {
            q = format!("{q} {}", b.canonical_name.replace('_', " "));
        }
        q
    } else {
        random_query(rng)
    }
}

/// One supersession trial: `queries` random queries against a fresh chain
/// corpus under random filters. Returns violations found.
pub fn supersession_trial(seed: u64, queries: usize) -> Vec<String> {
    use belief_store::HardFilters;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (corpus, chain) = chain_corpus(&mut rng);
    let store = store_with(&corpus);
    let superseded = &chain[..3];
    let mut bad = Vec::new();
    for _ in 0..queries {
        let q = chain_query(&mut rng, &corpus, &chain);
        let filters = HardFilters::new(*USERS.choose(&mut rng).unwrap(), scope(SCOPES.choose(&mut rng).unwrap()));
        let ctx = store.retrieve(&q, &filters, rng.gen_range(0..30));
        for b in ctx.all() {
            if superseded.contains(&b.id) || !b.is_active() {
                bad.push(format!("seed {seed}: `{q}` returned superseded {}", b.id));
            }
        }
    }
    bad
}

/// One isolation trial over a fresh two-user, multi-scope corpus. Every
/// belief in every tier must belong to the requesting user and carry the
/// active scope or the universal label. Returns (retrievals, violations).
pub fn isolation_trial(seed: u64, queries: usize) -> (usize, Vec<String>) {
    use belief_store::HardFilters;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (corpus, _) = chain_corpus(&mut rng);
    let store = store_with(&corpus);
    let users = ["u-a", "u-b", "u-c"];
    let scopes = ["user:universal", "domain:code", "domain:writing", "project:atlas", "project:other"];
    let mut bad = Vec::new();
    for _ in 0..queries {
        let q = random_query(&mut rng);
        let user = *users.choose(&mut rng).unwrap();
        let active = scope(scopes.choose(&mut rng).unwrap());
        let ctx = store.retrieve(&q, &HardFilters::new(user, active.clone()), rng.gen_range(0..30));
        for b in ctx.all() {
            if b.user_id != user {
                bad.push(format!("seed {seed}: {} of {} leaked to {user}", b.id, b.user_id));
            }
            if !b.scope.contains(&active) && !b.scope.contains(&ScopeLabel::Universal) {
                bad.push(format!("seed {seed}: {} {:?} leaked into {active}", b.id, b.scope));
            }
        }
    }
    (queries, bad)
}

/// Random corpus seeded with near-duplicate pairs that compaction can merge:
/// same user, type and scope, sharing the canonical name or two aliases.
pub fn duplicate_corpus<R: Rng>(rng: &mut R) -> Vec<Belief> {
    let n = rng.gen_range(8..20);
    let mut corpus = random_corpus(rng, n);
    let originals = corpus.len();
    for i in 0..originals {
        if !rng.gen_bool(0.4) || corpus[i].belief_type == BeliefType::OpenQuestion {
            continue;
        }
        let src = corpus[i].clone();
        let mut dup = src.clone();
        dup.id = BeliefId::new(format!("{}-dup", src.id));
        let mut al = aliases(rng, &VOCAB);
        if rng.gen_bool(0.5) {
            dup.canonical_name = canonical(rng, &VOCAB);
            al.truncate(3);
            al[0] = src.aliases[0].clone();
            al[1] = src.aliases[1].clone();
            al.dedup();
        }
        al.sort();
        al.dedup_by(|a, b| a.eq_ignore_ascii_case(b));
        while al.len() < 3 {
            al.push(format!("extra {}", al.len()));
        }
        dup.aliases = al;
        dup.reinforcement_count = rng.gen_range(0..20);
        dup.pinned = rng.gen_bool(0.2);
        corpus.push(dup);
    }
    corpus
}

fn terminal_of(store: &Store, id: &BeliefId) -> BeliefId {
    let mut cur = store.get(id).unwrap();
    while let Some(next) = cur.superseded_by.clone() {
        cur = store.get(&next).unwrap();
    }
    cur.id
}

/// Runs `queries` random retrievals, compacts every user, reruns them and
/// compares the union of all tiers up to survivor substitution. Returns
/// (merged pairs, violations).
pub fn compaction_trial(seed: u64, queries: usize) -> (usize, Vec<String>) {
    use belief_store::{compact, HardFilters};
    use rand::SeedableRng;
    use std::collections::BTreeSet;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let corpus = duplicate_corpus(&mut rng);
    let store = store_with(&corpus);
    let battery: Vec<(String, HardFilters)> = (0..queries)
        .map(|_| {
            let q = random_query(&mut rng);
            let f = HardFilters::new(*USERS.choose(&mut rng).unwrap(), scope(SCOPES.choose(&mut rng).unwrap()));
            (q, f)
        })
        .collect();
    let run = |store: &Store| -> Vec<BTreeSet<BeliefId>> {
        battery
            .iter()
            .map(|(q, f)| store.retrieve(q, f, 1000).all().map(|b| b.id.clone()).collect())
            .collect()
    };
    let before = run(&store);
    let mut merged = 0;
    for u in USERS {
        merged += compact(&store, u).unwrap().merged.len();
    }
    let after = run(&store);
    let mut bad = Vec::new();
    for (i, (b, a)) in before.iter().zip(&after).enumerate() {
        let mapped: BTreeSet<BeliefId> = b.iter().map(|id| terminal_of(&store, id)).collect();
        if &mapped != a {
            bad.push(format!(
                "seed {seed} query `{}`: before {mapped:?} after {a:?}",
                battery[i].0
            ));
        }
    }
    (merged, bad)
}

/// Applies `steps` random enrichments to active beliefs below the alias
/// ceiling and checks after each that the set of battery queries whose index
/// search returns the target never shrinks. Returns violations.
pub fn flywheel_trial(seed: u64, steps: usize, battery_size: usize) -> Vec<String> {
    use belief_store::lifecycle::{enrich_alias, AliasProposal};
    use belief_store::{clean_query, HardFilters};
    use rand::SeedableRng;
    use std::collections::BTreeSet;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let corpus = random_corpus(&mut rng, 20);
    let store = store_with(&corpus);
    let mut battery: Vec<String> = (0..battery_size).map(|_| random_query(&mut rng)).collect();
    let extra = ["kube", "pg", "k9s", "tf", "celery", "bull", "gql", "kubernets"];
    battery.extend(extra.iter().map(|w| format!("what about {w}")));
    let retrieving = |store: &Store, id: &BeliefId| -> BTreeSet<usize> {
        let view = store.view();
        let b = view.get(id).unwrap();
        let scope = b.scope.iter().next().unwrap().clone();
        let filters = HardFilters::new(b.user_id.clone(), scope);
        let config = &store.options().retrieval.search;
        battery
            .iter()
            .enumerate()
            .filter(|(_, q)| view.index().search(&clean_query(q), &filters, config).iter().any(|h| &h.belief_id == id))
            .map(|(i, _)| i)
            .collect()
    };
    let mut bad = Vec::new();
    for step in 0..steps {
        let view = store.view();
        let eligible: Vec<BeliefId> = view
            .beliefs()
            .filter(|b| b.is_active() && b.aliases.len() < 25)
            .map(|b| b.id.clone())
            .collect();
        let Some(target) = eligible.choose(&mut rng).cloned() else {
            break;
        };
        let before = retrieving(&store, &target);
        let word = if rng.gen_bool(0.5) { *extra.choose(&mut rng).unwrap() } else { *VOCAB.choose(&mut rng).unwrap() };
        let surface = if rng.gen_bool(0.3) { format!("{word} {}", VOCAB.choose(&mut rng).unwrap()) } else { word.to_string() };
        let mut p = AliasProposal::new(target.clone(), surface.clone());
        if rng.gen_bool(0.2) {
            p = p.counter_signal();
        }
        enrich_alias(&store, &p).unwrap();
        let after = retrieving(&store, &target);
        if !before.is_subset(&after) {
            bad.push(format!("seed {seed} step {step}: +`{surface}` on {target} lost {:?}", before.difference(&after).collect::<Vec<_>>()));
        }
    }
    bad
}
