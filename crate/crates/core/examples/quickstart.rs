//! Store a few beliefs, retrieve tiered context, print the persona prelude.
//!
//! cargo run --example quickstart

use belief_store::{Belief, BeliefType, HardFilters, ScopeLabel, Store, Subtype, Timestamp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = Store::in_memory();
    let now = Timestamp::now();

    store.put(
        Belief::builder("pref-terse", "u1", BeliefType::Preference, "terse_answers")
            .subtype(Subtype::Style)
            .aliases(["terse", "short answers", "brevity"])
            .content("Keep answers short.")
            .why_it_matters("Long answers get skimmed.")
            .scope(ScopeLabel::Universal)
            .build(now),
    )?;
    store.put(
        Belief::builder("dec-orm", "u1", BeliefType::Decision, "orm_choice")
            .aliases(["drizzle", "orm", "query builder"])
            .content("Use Drizzle for database access.")
            .why_it_matters("Typed SQL without a heavy runtime.")
            .scope(ScopeLabel::domain("code"))
            .build(now),
    )?;
    store.put(
        Belief::builder("q-migrations", "u1", BeliefType::OpenQuestion, "migration_strategy")
            .aliases(["migrations", "schema changes", "drizzle kit"])
            .content("How should schema migrations run in CI?")
            .why_it_matters("Deploys currently block on manual steps.")
            .scope(ScopeLabel::domain("code"))
            .pinned(true)
            .build(now),
    )?;

    let ctx = store.retrieve("which orm do we use?", &HardFilters::new("u1", ScopeLabel::domain("code")), 10);
    println!("{}", ctx.persona_prelude);
    for (tier, beliefs) in [
        ("pinned", &ctx.pinned_facts),
        ("relevant", &ctx.relevant_beliefs),
        ("open questions", &ctx.open_questions),
    ] {
        for b in beliefs {
            println!("{tier:<15} {:<14} {}", b.id.as_str(), b.content);
        }
    }
    Ok(())
}
