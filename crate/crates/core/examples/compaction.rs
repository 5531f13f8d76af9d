//! Near-duplicate beliefs collapse into one survivor whose alias set is the
//! union of both, so no query that found either one stops finding it.
//!
//! cargo run --example compaction

use belief_store::{compact, Belief, BeliefType, HardFilters, ScopeLabel, Store, Timestamp};

fn decision(id: &str, aliases: [&str; 3], reinforced: u32) -> Belief {
    Belief::builder(id, "u1", BeliefType::Decision, "test_runner")
        .aliases(aliases)
        .content("Use Vitest.")
        .why_it_matters("One runner across packages.")
        .scope(ScopeLabel::domain("code"))
        .reinforcement_count(reinforced)
        .build(Timestamp::now())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = Store::in_memory();
    store.put(decision("tr-a", ["vitest", "unit suite", "runner"], 4))?;
    store.put(decision("tr-b", ["vitest", "vi mocks", "spec files"], 1))?;

    let filters = HardFilters::new("u1", ScopeLabel::domain("code"));
    let show = |label: &str| {
        for q in ["unit suite", "vi mocks", "spec files"] {
            let ctx = store.retrieve(q, &filters, 10);
            let ids: Vec<&str> = ctx.relevant_beliefs.iter().map(|b| b.id.as_str()).collect();
            println!("{label:<7}{q:<12} -> {ids:?}");
        }
    };
    show("before");
    let report = compact(&store, "u1")?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    show("after");
    Ok(())
}
