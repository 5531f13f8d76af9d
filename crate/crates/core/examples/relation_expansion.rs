//! A relation belief links participants. When the relation matches, its
//! participants visible in the active scope join the relevant tier, even if
//! the query never named them.
//!
//! cargo run --example relation_expansion

use belief_store::bench::{build_seed_corpus, PRIMARY_USER};
use belief_store::{HardFilters, Store};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = Store::in_memory();
    store.write(|tx| build_seed_corpus().into_iter().try_for_each(|b| tx.insert(b)))?;

    let q = "what are the auth service dependencies and failure modes?";
    for scope in ["domain:code", "domain:writing"] {
        let ctx = store.retrieve(q, &HardFilters::new(PRIMARY_USER, scope.parse()?), 20);
        println!("[{scope}] {q}");
        for h in &ctx.relevant_hits {
            match &h.expanded_from {
                Some(src) => println!("  {:<24} expanded from {src}", h.belief_id.as_str()),
                None => println!("  {:<24} score {:.4}", h.belief_id.as_str(), h.score),
            }
        }
        let qs: Vec<&str> = ctx.open_questions.iter().map(|b| b.id.as_str()).collect();
        println!("  open questions {qs:?}");
    }
    Ok(())
}
