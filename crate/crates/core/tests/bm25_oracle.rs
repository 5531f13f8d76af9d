//! Index scores against the brute-force BM25 in common::bm25.

mod common;

use belief_store::index::SearchConfig;
use belief_store::{clean_query, Belief, FieldKind, PostingIndex};
use common::bm25::{close, oracle, search};
use common::{entity, DISTINCT};
use proptest::prelude::*;

// Hand-computed: N=3, canonical lengths 2,1,1 (avgdl 4/3).
#[test]
fn toy_corpus_hand_values() {
    let corpus = vec![
        entity("a", "alpha_bravo", &["kilo", "lima", "mike"]),
        entity("b", "alpha", &["kilo", "lima", "mike"]),
        entity("c", "charlie", &["kilo", "lima", "mike"]),
    ];
    let index = PostingIndex::build(&corpus);
    let p = SearchConfig::default().bm25;
    let q = clean_query("alpha");
    let canon = |id: &str| index.score_bm25(&q, FieldKind::CanonicalName, &id.into(), &p);
    assert!(close(canon("a"), 0.39019169220400696));
    assert!(close(canon("b"), 0.523548346501579));
    assert_eq!(canon("c"), 0.0);
    let q = clean_query("charlie");
    assert!(close(index.score_bm25(&q, FieldKind::CanonicalName, &"c".into(), &p), 1.0925692944940748));
}

#[test]
fn single_document_single_term() {
    let corpus = vec![entity("a", "alpha", &["kilo", "lima", "mike"])];
    let q = clean_query("alpha");
    let s = PostingIndex::build(&corpus).score_bm25(&q, FieldKind::CanonicalName, &"a".into(), &Default::default());
    assert!(close(s, (4.0f64 / 3.0).ln()));
}

#[test]
fn repeated_query_terms_count_once() {
    let corpus = vec![
        entity("a", "redis", &["cache", "session store", "kv"]),
        entity("b", "postgres", &["sql", "database", "pg"]),
    ];
    assert_eq!(search(&corpus, "redis"), search(&corpus, "redis redis redis redis redis"));
}

fn arb_belief(i: usize) -> impl Strategy<Value = Belief> {
    let word = proptest::sample::select(&DISTINCT[..]);
    let canonical = proptest::collection::vec(word.clone(), 1..=3).prop_map(|ws| ws.join("_"));
    let alias = proptest::collection::vec(word, 1..=3).prop_map(|ws| ws.join(" "));
    let aliases = proptest::collection::btree_set(alias, 3..=5);
    (canonical, aliases).prop_map(move |(c, a)| {
        let a: Vec<String> = a.into_iter().collect();
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        entity(&format!("b{i}"), &c, &refs)
    })
}

fn arb_corpus() -> impl Strategy<Value = Vec<Belief>> {
    (1usize..=5).prop_flat_map(|n| (0..n).map(arb_belief).collect::<Vec<_>>())
}

fn arb_query() -> impl Strategy<Value = String> {
    let word = proptest::sample::select(&DISTINCT[..]);
    proptest::collection::vec(word, 1..=5).prop_map(|ws| ws.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn search_matches_brute_force(corpus in arb_corpus(), query in arb_query()) {
        let got = search(&corpus, &query);
        let want = oracle(&corpus, &query);
        prop_assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
        for (id, s) in &want {
            prop_assert!(close(got[id], *s), "{}: {} vs {}", id, got[id], s);
        }
    }
}
