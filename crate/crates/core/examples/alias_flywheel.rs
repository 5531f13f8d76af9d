//! Vocabulary the user actually types becomes a new alias, so the next query
//! with that word finds the belief. Counter-signals let a replaced tool's
//! name surface its replacement.
//!
//! cargo run --example alias_flywheel

use belief_store::bench::{build_seed_corpus, PRIMARY_USER};
use belief_store::{enrich_alias, AliasProposal, HardFilters, ScopeLabel, Store};

fn hits(store: &Store, q: &str) -> Vec<String> {
    let filters = HardFilters::new(PRIMARY_USER, ScopeLabel::domain("code"));
    store.retrieve(q, &filters, 10).relevant_beliefs.iter().map(|b| b.id.to_string()).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = Store::in_memory();
    store.write(|tx| build_seed_corpus().into_iter().try_for_each(|b| tx.insert(b)))?;

    let q = "kube nodes keep autoscaling";
    println!("before: {q:?} -> {:?}", hits(&store, q));
    let out = enrich_alias(&store, &AliasProposal::new("b-kubernetes-entity", "kube"))?;
    println!("enriched {} (added={})", out.belief_id, out.added);
    println!("after:  {q:?} -> {:?}", hits(&store, q));

    let again = enrich_alias(&store, &AliasProposal::new("b-kubernetes-entity", "Kube"))?;
    println!("repeat proposal added={}", again.added);

    for e in store.list_audit(&"b-kubernetes-entity".into())? {
        println!("  {:?} {}", e.kind, e.detail);
    }
    Ok(())
}
