//! Canonical names and aliases go through different analyzers. A single
//! query token can hit a canonical part, an alias word, an alias phrase or a
//! fuzzy neighbour; the explain output shows which.
//!
//! cargo run --example analyzer_asymmetry

use belief_store::{clean_query, Belief, BeliefType, HardFilters, ScopeLabel, Store, Timestamp};

fn main() {
    let store = Store::in_memory();
    let now = Timestamp::now();
    let mk = |id: &str, name: &str, aliases: [&str; 3]| {
        Belief::builder(id, "u1", BeliefType::Entity, name)
            .aliases(aliases)
            .content(format!("Notes on {name}."))
            .why_it_matters("Shared infrastructure.")
            .scope(ScopeLabel::Universal)
            .build(now)
    };
    for b in [
        mk("k8s", "kubernetes_cluster", ["k8s", "kubectl", "helm charts"]),
        mk("cache", "redis_cache", ["redis", "session store", "cache layer"]),
        mk("ci", "ci_pipeline", ["github actions", "workflows", "build matrix"]),
    ] {
        store.put(b).expect("valid belief");
    }

    let filters = HardFilters::new("u1", ScopeLabel::Universal);
    for q in [
        "kubernetes",        // canonical part
        "k8s pods",          // alias word
        "helm charts",       // alias phrase
        "kuberentes",        // fuzzy
        "the session store", // phrase; filler words match nothing
        "```\nredis-cli ping\n``` why does redis hang?", // fenced code stripped
    ] {
        let cleaned = clean_query(q);
        let ctx = store.retrieve(q, &filters, 5);
        println!("{q:?}\n  tokens {:?}", cleaned.tokens);
        for h in &ctx.relevant_hits {
            println!("  {:<6} {:>8.4} {:?}", h.belief_id.as_str(), h.score, h.matched_paths);
        }
    }
}
