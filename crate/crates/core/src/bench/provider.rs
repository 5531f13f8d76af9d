//! Provider interface, the bundled adapters and the schema-aware wrapper.

use serde::{Deserialize, Serialize};

use super::score::TieredOutput;
use crate::lifecycle::{enrich_alias, AliasProposal};
use crate::model::{Belief, BeliefId, BeliefType, ScopeLabel};
use crate::retrieval::{HardFilters, PinPolicy, RetrievalContext};
use crate::store::{Store, StoreError, StoreView};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveRequest {
    pub query: String,
    pub user_id: String,
    pub active_scope: ScopeLabel,
    pub max_beliefs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderOutput {
    Tiered(TieredOutput),
    Untiered { ids: Vec<BeliefId> },
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Other(String),
}

/// A memory system under test.
pub trait Provider {
    fn name(&self) -> &str;
    /// Drops all state.
    fn reset(&mut self) -> Result<(), ProviderError>;
    /// Ingests beliefs and returns how many are queryable afterwards.
    fn ingest(&mut self, beliefs: &[Belief]) -> Result<usize, ProviderError>;
    fn update_alias(&mut self, proposal: &AliasProposal) -> Result<(), ProviderError>;
    fn supersede(&mut self, old: &BeliefId, new: &BeliefId) -> Result<(), ProviderError>;
    fn retrieve(&mut self, request: &RetrieveRequest) -> Result<ProviderOutput, ProviderError>;
}

fn context_to_output(ctx: &RetrievalContext) -> TieredOutput {
    TieredOutput {
        persona_prelude: ctx.persona_prelude.clone(),
        pinned_facts: RetrievalContext::ids(&ctx.pinned_facts),
        relevant_beliefs: RetrievalContext::ids(&ctx.relevant_beliefs),
        open_questions: RetrievalContext::ids(&ctx.open_questions),
    }
}

fn insert_all(store: &Store, beliefs: &[Belief]) -> Result<(), StoreError> {
    // Superseded beliefs may point at later entries, so one transaction.
    store.write(|tx| {
        for b in beliefs {
            match tx.get(&b.id) {
                Some(existing) if existing == b => {}
                Some(_) => return Err(StoreError::DuplicateMismatch(b.id.clone())),
                None => tx.insert(b.clone())?,
            }
        }
        Ok(())
    })
}

/// The store's own tiered retrieval.
#[derive(Debug)]
pub struct BuiltinProvider {
    store: Store,
}

impl Default for BuiltinProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl BuiltinProvider {
    pub fn new() -> Self {
        Self {
            store: Store::in_memory(),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }
}

impl Provider for BuiltinProvider {
    fn name(&self) -> &str {
        "builtin"
    }

    fn reset(&mut self) -> Result<(), ProviderError> {
        self.store = Store::in_memory_with(self.store.options().clone());
        Ok(())
    }

    fn ingest(&mut self, beliefs: &[Belief]) -> Result<usize, ProviderError> {
        insert_all(&self.store, beliefs)?;
        Ok(self.store.view().len())
    }

    fn update_alias(&mut self, proposal: &AliasProposal) -> Result<(), ProviderError> {
        enrich_alias(&self.store, proposal)?;
        Ok(())
    }

    fn supersede(&mut self, old: &BeliefId, new: &BeliefId) -> Result<(), ProviderError> {
        self.store.supersede(old, new)?;
        Ok(())
    }

    fn retrieve(&mut self, r: &RetrieveRequest) -> Result<ProviderOutput, ProviderError> {
        let filters = HardFilters::new(r.user_id.clone(), r.active_scope.clone());
        let ctx = self.store.retrieve(&r.query, &filters, r.max_beliefs);
        Ok(ProviderOutput::Tiered(context_to_output(&ctx)))
    }
}

/// Baseline that returns every ingested id for every query, untiered.
#[derive(Debug, Default)]
pub struct ReturnAllProvider {
    ids: Vec<BeliefId>,
}

impl ReturnAllProvider {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Provider for ReturnAllProvider {
    fn name(&self) -> &str {
        "return-all"
    }

    fn reset(&mut self) -> Result<(), ProviderError> {
        self.ids.clear();
        Ok(())
    }

    fn ingest(&mut self, beliefs: &[Belief]) -> Result<usize, ProviderError> {
        for b in beliefs {
            if !self.ids.contains(&b.id) {
                self.ids.push(b.id.clone());
            }
        }
        Ok(self.ids.len())
    }

    fn update_alias(&mut self, _: &AliasProposal) -> Result<(), ProviderError> {
        Ok(())
    }

    fn supersede(&mut self, _: &BeliefId, _: &BeliefId) -> Result<(), ProviderError> {
        Ok(())
    }

    fn retrieve(&mut self, _: &RetrieveRequest) -> Result<ProviderOutput, ProviderError> {
        Ok(ProviderOutput::Untiered { ids: self.ids.clone() })
    }
}

pub fn provider_by_name(name: &str) -> Option<Box<dyn Provider>> {
    match name {
        "builtin" => Some(Box::new(BuiltinProvider::new())),
        "return-all" => Some(Box::new(ReturnAllProvider::new())),
        _ => None,
    }
}

pub const PROVIDER_NAMES: [&str; 2] = ["builtin", "return-all"];

/// Routes provider ids into tiers using the harness's own catalog: drops
/// unknown, foreign-user and out-of-scope ids, sends open questions to the
/// question tier and pin-eligible beliefs to the pinned tier. Activity is not
/// checked and no budget is applied; those are the provider's job.
///
/// Tiered output is re-routed tier by tier, which leaves correctly tiered
/// output unchanged.
pub fn schema_aware_wrap(catalog: &StoreView, request: &RetrieveRequest, output: ProviderOutput) -> TieredOutput {
    let (prelude, ids): (String, Vec<BeliefId>) = match output {
        ProviderOutput::Tiered(t) => {
            let ids = t.all().cloned().collect();
            (t.persona_prelude, ids)
        }
        ProviderOutput::Untiered { ids } => (String::new(), ids),
    };
    let filters = HardFilters {
        user_id: request.user_id.clone(),
        active_scope: request.active_scope.clone(),
        require_active: false,
    };
    let pins = PinPolicy::default();
    let mut out = TieredOutput {
        persona_prelude: prelude,
        ..TieredOutput::default()
    };
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        let Some(b) = catalog.get(&id) else {
            continue;
        };
        if !filters.admits(b) || !seen.insert(id.clone()) {
            continue;
        }
        if b.belief_type == BeliefType::OpenQuestion {
            out.open_questions.push(id);
        } else if b.is_active() && pins.is_pinned(b) {
            out.pinned_facts.push(id);
        } else {
            out.relevant_beliefs.push(id);
        }
    }
    out
}
