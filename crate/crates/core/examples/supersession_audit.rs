//! A decision replaced twice. Retrieval only ever returns the terminal
//! belief; the history stays readable through the audit trail.
//!
//! cargo run --example supersession_audit

use belief_store::{Belief, BeliefType, HardFilters, ScopeLabel, Store, Timestamp};

fn decision(id: &str, name: &str, aliases: [&str; 3], content: &str) -> Belief {
    Belief::builder(id, "u1", BeliefType::Decision, name)
        .aliases(aliases)
        .content(content)
        .why_it_matters("Lint config is shared by every package.")
        .scope(ScopeLabel::domain("code"))
        .build(Timestamp::now())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = Store::in_memory();
    store.put(decision("lint-v1", "lint_tool", ["tslint", "linter", "lint rules"], "Use TSLint."))?;
    store.put(decision("lint-v2", "lint_tool_eslint", ["eslint", "linter", "lint rules"], "Use ESLint."))?;
    store.put(decision("lint-v3", "lint_tool_biome", ["biome", "linter", "formatter"], "Use Biome."))?;
    store.supersede(&"lint-v1".into(), &"lint-v2".into())?;
    store.supersede(&"lint-v2".into(), &"lint-v3".into())?;

    let filters = HardFilters::new("u1", ScopeLabel::domain("code"));
    for q in ["which linter?", "tslint config", "eslint rules"] {
        let ctx = store.retrieve(q, &filters, 10);
        let ids: Vec<&str> = ctx.relevant_beliefs.iter().map(|b| b.id.as_str()).collect();
        println!("{q:<16} -> {ids:?}");
    }

    for id in ["lint-v1", "lint-v2", "lint-v3"] {
        println!("{id}:");
        for e in store.list_audit(&id.into())? {
            println!("  {} {:?} {}", e.at, e.kind, e.detail);
        }
    }
    Ok(())
}
