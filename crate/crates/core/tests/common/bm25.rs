//! Brute-force BM25 written from the definition, independent of the
//! crate's analyzer and index.

use std::collections::{BTreeMap, BTreeSet};

use belief_store::index::SearchConfig;
use belief_store::{clean_query, Belief, BeliefId, HardFilters, PostingIndex, ScopeLabel};

const K1: f64 = 1.2;
const B: f64 = 0.75;

pub fn words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

fn pairs(ws: &[String]) -> Vec<String> {
    ws.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect()
}

/// Per-field bags of terms, built without the crate's analyzer.
fn fields(b: &Belief) -> [Vec<String>; 3] {
    let canonical = b.canonical_name.split('_').map(String::from).collect();
    let mut exact = Vec::new();
    let mut shingle = Vec::new();
    for a in &b.aliases {
        let ws = words(a);
        shingle.extend(pairs(&ws));
        exact.extend(ws);
    }
    [canonical, exact, shingle]
}

fn bm25(corpus: &[Belief], field: usize, terms: &BTreeSet<String>, doc: usize) -> f64 {
    let bags: Vec<[Vec<String>; 3]> = corpus.iter().map(fields).collect();
    let n = corpus.len() as f64;
    let avgdl = bags.iter().map(|f| f[field].len()).sum::<usize>() as f64 / n;
    let dl = bags[doc][field].len() as f64;
    let mut total = 0.0;
    for t in terms {
        let tf = bags[doc][field].iter().filter(|x| *x == t).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let df = bags.iter().filter(|f| f[field].contains(t)).count() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let norm = if avgdl > 0.0 { 1.0 - B + B * dl / avgdl } else { 1.0 };
        total += idf * tf * (K1 + 1.0) / (tf + K1 * norm);
    }
    total
}

/// Boosted total without fuzzy; valid whenever no fuzzy match can fire.
pub fn oracle(corpus: &[Belief], query: &str) -> BTreeMap<BeliefId, f64> {
    let q = words(query);
    let tokens: BTreeSet<String> = q.iter().cloned().collect();
    let phrases: BTreeSet<String> = pairs(&q).into_iter().collect();
    let mut out = BTreeMap::new();
    for (i, b) in corpus.iter().enumerate() {
        let s = 10.0 * bm25(corpus, 0, &tokens, i) + 3.0 * bm25(corpus, 1, &tokens, i) + 6.0 * bm25(corpus, 2, &phrases, i);
        if s > 0.0 {
            out.insert(b.id.clone(), s);
        }
    }
    out
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn search(corpus: &[Belief], query: &str) -> BTreeMap<BeliefId, f64> {
    let index = PostingIndex::build(corpus);
    index
        .search(&clean_query(query), &HardFilters::new("u1", ScopeLabel::Universal), &SearchConfig::default())
        .into_iter()
        .map(|h| (h.belief_id, h.score))
        .collect()
}

/// One generated corpus of 1-5 beliefs over DISTINCT words, checked against
/// `queries` random queries. Returns mismatches.
pub fn battery_trial(seed: u64, queries: usize) -> Vec<String> {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let words = &super::DISTINCT;
    let phrase = |rng: &mut rand_chacha::ChaCha8Rng, sep: &str| {
        let n = rng.gen_range(1..=3);
        (0..n).map(|_| *words.choose(rng).unwrap()).collect::<Vec<_>>().join(sep)
    };
    let n = rng.gen_range(1..=5);
    let corpus: Vec<Belief> = (0..n)
        .map(|i| {
            let canonical = phrase(&mut rng, "_");
            let mut aliases = BTreeSet::new();
            let want = rng.gen_range(3..=5);
            while aliases.len() < want {
                aliases.insert(phrase(&mut rng, " "));
            }
            let refs: Vec<&str> = aliases.iter().map(String::as_str).collect();
            super::entity(&format!("b{i}"), &canonical, &refs)
        })
        .collect();
    let mut bad = Vec::new();
    for _ in 0..queries {
        let k = rng.gen_range(1..=5);
        let q = (0..k).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        let got = search(&corpus, &q);
        let want = oracle(&corpus, &q);
        if got.keys().ne(want.keys()) || want.iter().any(|(id, s)| !close(got[id], *s)) {
            bad.push(format!("seed {seed} `{q}`: got {got:?} want {want:?}"));
        }
    }
    bad
}
