//! The fixed 35-belief seed corpus: two domain scopes, universal persona
//! beliefs, a three-hop supersession chain and one secondary-user belief.

use crate::model::Belief;

pub const PRIMARY_USER: &str = "u-primary";
pub const SECONDARY_USER: &str = "u-secondary";
pub const SEED_CORPUS_SIZE: usize = 35;

const SEED_JSON: &str = include_str!("../../suite/seed_corpus.json");

/// Deterministic fixture; every call returns the same beliefs in the same
/// order.
pub fn build_seed_corpus() -> Vec<Belief> {
    serde_json::from_str(SEED_JSON).expect("bundled seed corpus parses")
}
