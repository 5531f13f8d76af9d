//! Local-first structured belief store for LLM memory.
//!
//! Beliefs are small typed records (preferences, decisions, entities, open
//! questions, relations) with aliases, scope labels and a supersession
//! history. Retrieval is lexical: canonical names and alias phrases are
//! indexed with separate analyzers and ranked by boosted multi-field BM25,
//! under hard filters for user, scope and activity. The [`bench`] module is a
//! precision-oriented benchmark harness over tiered retrieval output.
//!
//! Start with [`Store`], [`HardFilters`] and [`Store::retrieve`].

pub mod analysis;
pub mod bench;
pub mod index;
pub mod lifecycle;
pub mod model;
pub mod retrieval;
pub mod store;

pub use analysis::{clean_query, CleanQuery, FieldKind};
pub use index::{fuzzy_match, MatchPath, PostingIndex, ScoredHit, SearchConfig};
pub use lifecycle::{compact, enrich_alias, merge, AliasProposal, CompactionReport, MergeAction, MergeVerdict};
pub use model::{
    Belief, BeliefId, BeliefType, ChangeEvent, ChangeKind, EpistemicStatus, ExpertiseDepth, Provenance, ScopeLabel,
    Subtype, Timestamp, Violation, Violations,
};
pub use retrieval::{build_prelude, HardFilters, RetrievalConfig, RetrievalContext, DEFAULT_MAX_BELIEFS};
pub use store::{
    Clock, ConflictRecord, ConflictStatus, ManualClock, PutOutcome, Resolution, Store, StoreError, StoreOptions,
    StoreView, SystemClock,
};
