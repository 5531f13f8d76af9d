//! Analytic return-all precision, derived from the authored expected sets
//! and the seed corpus without running any provider.

use belief_store::bench::{build_seed_corpus, bundled_suite_dir, load_suite, BenchCase};
use belief_store::{Belief, BeliefType, EpistemicStatus, ScopeLabel};

/// Pin eligibility restated from the schema: active, not a question, not
/// exploratory, and either pinned or an active-status preference.
fn pin_eligible(b: &Belief) -> bool {
    b.superseded_by.is_none()
        && b.resolved_at.is_none()
        && b.belief_type != BeliefType::OpenQuestion
        && b.epistemic_status != EpistemicStatus::Exploratory
        && (b.pinned || (b.belief_type == BeliefType::Preference && b.epistemic_status == EpistemicStatus::Active))
}

/// Relevant-tier size the wrapper produces from a full-corpus dump: every
/// belief of the user visible in the scope that is neither a question nor
/// pin-eligible. Superseded beliefs count; the wrapper does not check
/// activity.
fn wrapped_relevant_size(corpus: &[Belief], c: &BenchCase) -> usize {
    corpus
        .iter()
        .filter(|b| b.user_id == c.user_id)
        .filter(|b| b.scope.contains(&c.active_scope) || b.scope.contains(&ScopeLabel::Universal))
        .filter(|b| b.belief_type != BeliefType::OpenQuestion && !pin_eligible(b))
        .count()
}

/// Mean over active non-session cases of |expected| / |wrapped dump|.
pub fn analytic_return_all_precision() -> (f64, usize) {
    let corpus = build_seed_corpus();
    let active: Vec<BenchCase> = load_suite(bundled_suite_dir())
        .unwrap()
        .into_iter()
        .filter(|c| !c.is_session() && c.expected.asserts_precision())
        .collect();
    let sum: f64 = active
        .iter()
        .map(|c| c.expected.relevant_beliefs.as_ref().unwrap().len() as f64 / wrapped_relevant_size(&corpus, c) as f64)
        .sum();
    (sum / active.len() as f64, active.len())
}
