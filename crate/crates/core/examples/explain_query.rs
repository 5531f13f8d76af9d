//! Runs queries against the bundled seed corpus and prints every tier with
//! scores and match paths.
//!
//! cargo run --example explain_query -- domain:code "why is k8s slow" "redis outage"

use belief_store::bench::{build_seed_corpus, PRIMARY_USER};
use belief_store::{HardFilters, ScopeLabel, Store};

fn main() {
    let mut args = std::env::args().skip(1);
    let scope: ScopeLabel = args
        .next()
        .unwrap_or_else(|| "domain:code".into())
        .parse()
        .expect("scope like domain:code");
    let mut queries: Vec<String> = args.collect();
    if queries.is_empty() {
        queries.push("how do I configure k8s ingress".into());
    }

    let store = Store::in_memory();
    store
        .write(|tx| {
            for b in build_seed_corpus() {
                tx.insert(b)?;
            }
            Ok(())
        })
        .expect("seed corpus loads");

    let filters = HardFilters::new(PRIMARY_USER, scope);
    for q in queries {
        let ctx = store.retrieve(&q, &filters, 100);
        println!("query: {q}");
        println!("  pinned:    {:?}", ctx.pinned_facts.iter().map(|b| b.id.as_str()).collect::<Vec<_>>());
        for h in &ctx.relevant_hits {
            let paths: Vec<String> = h.matched_paths.iter().map(|p| format!("{p:?}")).collect();
            match &h.expanded_from {
                Some(src) => println!("  relevant:  {:<28} via relation {src}", h.belief_id.as_str()),
                None => println!("  relevant:  {:<28} {:>8.4} {}", h.belief_id.as_str(), h.score, paths.join("+")),
            }
        }
        println!("  questions: {:?}", ctx.open_questions.iter().map(|b| b.id.as_str()).collect::<Vec<_>>());
        println!("  latency:   {:.3} ms", ctx.latency_ms);
    }
}
