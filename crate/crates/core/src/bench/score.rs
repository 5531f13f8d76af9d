//! Per-case scoring: tier satisfaction, null-aware metrics, pass taxonomy
//! and drift.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::case::{DriftLabel, TierExpectation};
use crate::model::BeliefId;

/// Tiered provider output after any wrapping.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TieredOutput {
    #[serde(default)]
    pub persona_prelude: String,
    pub pinned_facts: Vec<BeliefId>,
    pub relevant_beliefs: Vec<BeliefId>,
    pub open_questions: Vec<BeliefId>,
}

impl TieredOutput {
    pub fn all(&self) -> impl Iterator<Item = &BeliefId> {
        self.pinned_facts
            .iter()
            .chain(&self.relevant_beliefs)
            .chain(&self.open_questions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassType {
    ActiveRetrieval,
    Structural,
    TriviallyEmpty,
    Fail,
}

impl PassType {
    pub const ALL: [PassType; 4] = [
        Self::ActiveRetrieval,
        Self::Structural,
        Self::TriviallyEmpty,
        Self::Fail,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub assertion: String,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierScore {
    pub retrieval_precision: Option<f64>,
    pub retrieval_recall: Option<f64>,
    pub pinned_coverage: Option<f64>,
    pub question_precision: Option<f64>,
    pub question_recall: Option<f64>,
    pub pass: bool,
    pub violations: Vec<Violation>,
}

fn precision_recall(returned: &[BeliefId], expected: &BTreeSet<BeliefId>) -> (Option<f64>, Option<f64>) {
    if expected.is_empty() {
        return (None, None);
    }
    let returned: BTreeSet<&BeliefId> = returned.iter().collect();
    let hit = returned.iter().filter(|id| expected.contains(**id)).count() as f64;
    let precision = if returned.is_empty() {
        0.0
    } else {
        hit / returned.len() as f64
    };
    (Some(precision), Some(hit / expected.len() as f64))
}

fn ids(v: impl IntoIterator<Item = impl ToString>) -> Vec<String> {
    v.into_iter().map(|x| x.to_string()).collect()
}

/// Subset checks for one tier. `exact` adds the reverse inclusion; an empty
/// expected set always demands an empty tier.
fn check_tier(name: &str, returned: &[BeliefId], expected: &BTreeSet<BeliefId>, exact: bool, out: &mut Vec<Violation>) {
    let got: BTreeSet<&BeliefId> = returned.iter().collect();
    let missing: Vec<_> = expected.iter().filter(|id| !got.contains(id)).collect();
    if !missing.is_empty() {
        out.push(Violation {
            assertion: format!("{name}: missing expected"),
            ids: ids(missing),
        });
    }
    if exact || expected.is_empty() {
        let extra: Vec<_> = got.iter().filter(|id| !expected.contains(**id)).collect();
        if !extra.is_empty() {
            out.push(Violation {
                assertion: format!("{name}: unexpected"),
                ids: ids(extra),
            });
        }
    }
}

/// Scores one retrieval against one expectation.
pub fn score_tiers(expected: &TierExpectation, got: &TieredOutput) -> TierScore {
    let mut violations = Vec::new();
    let (mut rp, mut rr, mut pc, mut qp, mut qr) = (None, None, None, None, None);

    if let Some(exp) = &expected.relevant_beliefs {
        (rp, rr) = precision_recall(&got.relevant_beliefs, exp);
        check_tier("relevantBeliefs", &got.relevant_beliefs, exp, expected.should_only_include, &mut violations);
    }
    if let Some(exp) = &expected.pinned_facts {
        if !exp.is_empty() {
            let got_set: BTreeSet<&BeliefId> = got.pinned_facts.iter().collect();
            pc = Some(exp.iter().filter(|id| got_set.contains(id)).count() as f64 / exp.len() as f64);
        }
        check_tier("pinnedFacts", &got.pinned_facts, exp, false, &mut violations);
    }
    if let Some(exp) = &expected.open_questions {
        (qp, qr) = precision_recall(&got.open_questions, exp);
        check_tier("openQuestions", &got.open_questions, exp, expected.should_only_include, &mut violations);
    }

    let leaked: BTreeSet<&BeliefId> = got.all().filter(|id| expected.must_exclude.contains(*id)).collect();
    if !leaked.is_empty() {
        violations.push(Violation {
            assertion: "mustExclude".into(),
            ids: ids(leaked),
        });
    }
    if !expected.ranked_prefix.is_empty() && !got.relevant_beliefs.starts_with(&expected.ranked_prefix) {
        violations.push(Violation {
            assertion: "rankedPrefix".into(),
            ids: ids(got.relevant_beliefs.iter().take(expected.ranked_prefix.len())),
        });
    }
    for s in &expected.prelude_contains {
        if !got.persona_prelude.contains(s.as_str()) {
            violations.push(Violation {
                assertion: "preludeContains".into(),
                ids: vec![s.clone()],
            });
        }
    }
    for s in &expected.prelude_excludes {
        if got.persona_prelude.contains(s.as_str()) {
            violations.push(Violation {
                assertion: "preludeExcludes".into(),
                ids: vec![s.clone()],
            });
        }
    }

    TierScore {
        retrieval_precision: rp,
        retrieval_recall: rr,
        pinned_coverage: pc,
        question_precision: qp,
        question_recall: qr,
        pass: violations.is_empty(),
        violations,
    }
}

pub fn pass_type(expected: &TierExpectation, pass: bool) -> PassType {
    if !pass {
        PassType::Fail
    } else if expected.asserts_precision() {
        PassType::ActiveRetrieval
    } else if expected.is_trivially_empty() {
        PassType::TriviallyEmpty
    } else {
        PassType::Structural
    }
}

/// Share of retrieved non-pinned beliefs (relevant plus questions) that
/// come from drift-turn topics. Zero when nothing non-pinned came back.
pub fn drift_score(got: &TieredOutput, drift_origin: &BTreeSet<BeliefId>) -> f64 {
    let non_pinned: BTreeSet<&BeliefId> = got.relevant_beliefs.iter().chain(&got.open_questions).collect();
    if non_pinned.is_empty() {
        return 0.0;
    }
    let drifted = non_pinned.iter().filter(|id| drift_origin.contains(**id)).count();
    drifted as f64 / non_pinned.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub turn: usize,
    pub query: String,
    pub pass: bool,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_label: Option<DriftLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_score: Option<f64>,
    pub violations: Vec<Violation>,
    pub returned: TieredOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub category: super::case::Category,
    pub retrieval_precision: Option<f64>,
    pub retrieval_recall: Option<f64>,
    pub pinned_coverage: Option<f64>,
    pub question_precision: Option<f64>,
    pub question_recall: Option<f64>,
    pub pass: bool,
    pub pass_type: PassType,
    /// Single-turn latency, or mean turn latency for sessions.
    pub latency_ms: f64,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returned: Option<TieredOutput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub turns: Vec<TurnResult>,
}
