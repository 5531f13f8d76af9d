//! Extracted beliefs go through merge: new ones insert, restatements
//! reinforce, contradictions queue a conflict for the user to settle.
//!
//! cargo run --example conflicts_and_merge

use belief_store::{merge, Belief, BeliefType, Resolution, ScopeLabel, Store, Timestamp};

fn extracted(name: &str, aliases: [&str; 3], content: &str, confidence: f64) -> Belief {
    Belief::builder(belief_store::BeliefId::generate(), "u1", BeliefType::Decision, name)
        .aliases(aliases)
        .content(content)
        .why_it_matters("Test tooling is shared across packages.")
        .scope(ScopeLabel::domain("code"))
        .confidence(confidence)
        .build(Timestamp::now())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let store = Store::in_memory();
    let stream = [
        extracted("test_runner", ["vitest", "test runner", "unit tests"], "Use Vitest.", 0.9),
        extracted("test_runner", ["vitest", "tests", "runner"], "use vitest.", 0.8),
        extracted("test_runner", ["jest", "test runner", "unit tests"], "Use Jest.", 0.7),
        extracted("e2e_runner", ["playwright", "e2e", "browser tests"], "Maybe Playwright?", 0.2),
    ];
    for b in stream {
        let content = b.content.clone();
        let v = merge(&store, b)?;
        println!("{content:<18} -> {:?} {:?}", v.action, v.conflict_id);
    }

    let pending = store.pending_conflicts(Some("u1"));
    let c = &pending[0];
    let existing = store.get(&c.existing_id).expect("conflict target exists");
    println!("conflict {}: stored {:?} vs incoming {:?}", c.id, existing.content, c.incoming.content);

    let settled = store.resolve_conflict(&c.id, Resolution::AcceptIncoming)?;
    println!("resolved as {:?}", settled.status);
    let old = store.get(&c.existing_id).expect("history is kept");
    println!("{} superseded by {:?}", old.id, old.superseded_by.map(|i| i.to_string()));
    Ok(())
}
