//! Precision benchmark harness.
//!
//! Cases assert tiers of a retrieval context rather than answer quality. A
//! pass requires every asserted tier at once; metrics are null where a tier
//! is unasserted or empty by design, and aggregates skip nulls. Untiered
//! providers are routed into tiers by [`provider::schema_aware_wrap`] so that
//! they fail on precision, not on formatting.

pub mod case;
pub mod corpus;
pub mod provider;
pub mod runner;
pub mod score;

pub use case::{load_suite, BenchCase, Category, DriftLabel, SessionTurn, TierExpectation};
pub use corpus::{build_seed_corpus, PRIMARY_USER, SECONDARY_USER, SEED_CORPUS_SIZE};
pub use provider::{
    provider_by_name, schema_aware_wrap, PROVIDER_NAMES, BuiltinProvider, Provider, ProviderError, ProviderOutput, RetrieveRequest,
    ReturnAllProvider,
};
pub use runner::{run_suite, LatencySummary, MetricMean, SuiteReport};
pub use score::{drift_score, score_tiers, CaseResult, PassType, TieredOutput};

/// Directory of the bundled case suite, for examples and tests.
pub fn bundled_suite_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("suite/cases")
}
