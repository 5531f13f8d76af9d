//! On-disk store: every write is one appended log generation. Reopening
//! replays the snapshot plus the log suffix.
//!
//! cargo run --example persistent_store -- /tmp/beliefs

use belief_store::store::{LOG_FILE, SNAPSHOT_FILE};
use belief_store::{Belief, BeliefType, HardFilters, ScopeLabel, Store, Timestamp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| {
        std::env::temp_dir().join(format!("belief-store-example-{}", std::process::id()))
    });

    {
        let store = Store::open(&root)?;
        store.put(
            Belief::builder("deploy", "u1", BeliefType::Decision, "deploy_target")
                .aliases(["fly io", "deploys", "hosting"])
                .content("Deploy to Fly.")
                .why_it_matters("Regions close to users.")
                .scope(ScopeLabel::project("atlas"))
                .build(Timestamp::now()),
        )?;
        store.snapshot()?;
        store.put(
            Belief::builder("db", "u1", BeliefType::Decision, "primary_database")
                .aliases(["postgres", "pg", "database"])
                .content("Postgres on Neon.")
                .why_it_matters("Branching for previews.")
                .scope(ScopeLabel::project("atlas"))
                .build(Timestamp::now()),
        )?;
        println!("wrote generation {}", store.generation());
    }

    let log = std::fs::read_to_string(root.join(LOG_FILE))?;
    println!("{} log lines, snapshot present: {}", log.lines().count(), root.join(SNAPSHOT_FILE).exists());

    let reopened = Store::open(&root)?;
    let ctx = reopened.retrieve("where do we deploy and which pg?", &HardFilters::new("u1", ScopeLabel::project("atlas")), 10);
    let ids: Vec<&str> = ctx.relevant_beliefs.iter().map(|b| b.id.as_str()).collect();
    println!("reopened at generation {}: {ids:?}", reopened.generation());
    println!("store root {}", root.display());
    Ok(())
}
