//! Suite execution and aggregate reporting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::case::{BenchCase, Category, DriftLabel, TierExpectation};
use super::provider::{schema_aware_wrap, Provider, ProviderError, RetrieveRequest};
use super::score::{drift_score, pass_type, score_tiers, CaseResult, PassType, TieredOutput, TurnResult};
use crate::lifecycle::enrich_alias;
use crate::model::Belief;
use crate::retrieval::DEFAULT_MAX_BELIEFS;
use crate::store::Store;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl LatencySummary {
    pub fn of(samples: &[f64]) -> Self {
        let mean = if samples.is_empty() {
            0.0
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        Self {
            count: samples.len(),
            mean_ms: mean,
            p50_ms: percentile(samples, 50.0),
            p95_ms: percentile(samples, 95.0),
        }
    }
}

/// Mean over non-null values, with the denominator made explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    pub n: usize,
    pub mean: Option<f64>,
}

impl MetricMean {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        Self {
            n: v.len(),
            mean: (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: Category,
    pub cases: usize,
    pub passed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub case_id: String,
    pub turn: usize,
    pub label: DriftLabel,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub provider: String,
    pub case_count: usize,
    pub passed: usize,
    pub ingest_ms: f64,
    pub categories: Vec<CategorySummary>,
    pub pass_types: BTreeMap<PassType, usize>,
    pub pass_types_non_session: BTreeMap<PassType, usize>,
    /// Precision and recall over cases carrying a precision assertion.
    pub active_precision: MetricMean,
    pub active_recall: MetricMean,
    pub retrieval_precision: MetricMean,
    pub retrieval_recall: MetricMean,
    pub pinned_coverage: MetricMean,
    pub question_precision: MetricMean,
    pub question_recall: MetricMean,
    pub latency_single_turn: LatencySummary,
    pub latency_session_turn: LatencySummary,
    pub drift: Vec<DriftEntry>,
    pub results: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.case_count
    }

    pub fn result(&self, case_id: &str) -> Option<&CaseResult> {
        self.results.iter().find(|r| r.case_id == case_id)
    }

    /// Plain-text tables: per category, pass types, metrics, latency, drift.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "provider: {}   cases: {}   passed: {}", self.provider, self.case_count, self.passed);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<32} {:>6} {:>8}", "Category", "Cases", "Passed");
        for c in &self.categories {
            let _ = writeln!(s, "{:<32} {:>6} {:>8}", c.category.label(), c.cases, format!("{}/{}", c.passed, c.cases));
        }
        let _ = writeln!(
            s,
            "{:<32} {:>6} {:>8}",
            "Total",
            self.case_count,
            format!("{}/{}", self.passed, self.case_count)
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<24} {:>10} {:>10} {:>10} {:>6}", "Pass types", "Active", "Structural", "Trivial", "Fail");
        for (label, m) in [("all cases", &self.pass_types), ("non-session", &self.pass_types_non_session)] {
            let get = |t| m.get(&t).copied().unwrap_or(0);
            let _ = writeln!(
                s,
                "{:<24} {:>10} {:>10} {:>10} {:>6}",
                label,
                get(PassType::ActiveRetrieval),
                get(PassType::Structural),
                get(PassType::TriviallyEmpty),
                get(PassType::Fail)
            );
        }
        let _ = writeln!(s);
        let fmt = |m: &MetricMean| match m.mean {
            Some(v) => format!("{v:.3} (n={})", m.n),
            None => format!("null (n={})", m.n),
        };
        let _ = writeln!(s, "active precision     {}", fmt(&self.active_precision));
        let _ = writeln!(s, "active recall        {}", fmt(&self.active_recall));
        let _ = writeln!(s, "retrieval precision  {}", fmt(&self.retrieval_precision));
        let _ = writeln!(s, "retrieval recall     {}", fmt(&self.retrieval_recall));
        let _ = writeln!(s, "pinned coverage      {}", fmt(&self.pinned_coverage));
        let _ = writeln!(s, "question precision   {}", fmt(&self.question_precision));
        let _ = writeln!(s, "question recall      {}", fmt(&self.question_recall));
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<16} {:>6} {:>10} {:>10} {:>10}", "Latency (ms)", "n", "mean", "p50", "p95");
        for (label, l) in [("single-turn", &self.latency_single_turn), ("session-turn", &self.latency_session_turn)] {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>10.3} {:>10.3} {:>10.3}",
                label, l.count, l.mean_ms, l.p50_ms, l.p95_ms
            );
        }
        let _ = writeln!(s, "ingest: {:.3} ms", self.ingest_ms);
        if !self.drift.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<28} {:>5} {:<26} {:>6}", "Drift case", "turn", "label", "score");
            for d in &self.drift {
                let label = serde_json::to_value(&d.label)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                let _ = writeln!(s, "{:<28} {:>5} {:<26} {:>6.2}", d.case_id, d.turn, label, d.score);
            }
        }
        let failed: Vec<&CaseResult> = self.results.iter().filter(|r| !r.pass).collect();
        if !failed.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "failures:");
            for r in failed {
                let v = r
                    .violations
                    .iter()
                    .map(|v| format!("{} [{}]", v.assertion, v.ids.join(", ")))
                    .collect::<Vec<_>>()
                    .join("; ");
                let _ = writeln!(s, "  {}: {}", r.case_id, v);
            }
        }
        s
    }
}

struct Harness<'a> {
    provider: &'a mut dyn Provider,
    catalog: Store,
    corpus: &'a [Belief],
}

impl Harness<'_> {
    fn fresh(&mut self) -> Result<f64, ProviderError> {
        self.catalog = Store::in_memory();
        self.add(self.corpus)
    }

    /// Ingests into provider and catalog; returns provider wall-clock ms.
    fn add(&mut self, beliefs: &[Belief]) -> Result<f64, ProviderError> {
        if beliefs.is_empty() {
            return Ok(0.0);
        }
        self.catalog.write(|tx| {
            for b in beliefs {
                if tx.get(&b.id).is_none() {
                    tx.insert(b.clone())?;
                }
            }
            Ok(())
        })?;
        let started = Instant::now();
        let queryable = self.provider.ingest(beliefs)?;
        let ms = started.elapsed().as_secs_f64() * 1000.0;
        let expected = self.catalog.view().len();
        if queryable < expected {
            return Err(ProviderError::Other(format!(
                "{} reports {queryable} of {expected} beliefs queryable after ingestion",
                self.provider.name()
            )));
        }
        Ok(ms)
    }

    fn retrieve(&mut self, request: &RetrieveRequest) -> Result<(TieredOutput, f64), ProviderError> {
        let started = Instant::now();
        let output = self.provider.retrieve(request)?;
        let ms = started.elapsed().as_secs_f64() * 1000.0;
        Ok((schema_aware_wrap(&self.catalog.view(), request, output), ms))
    }
}

fn request(query: &str, case: &BenchCase, scope: Option<&crate::model::ScopeLabel>) -> RetrieveRequest {
    RetrieveRequest {
        query: query.to_string(),
        user_id: case.user_id.clone(),
        active_scope: scope.unwrap_or(&case.active_scope).clone(),
        max_beliefs: case.max_beliefs.unwrap_or(DEFAULT_MAX_BELIEFS),
    }
}

fn single_result(case: &BenchCase, expected: &TierExpectation, got: TieredOutput, latency_ms: f64) -> CaseResult {
    let s = score_tiers(expected, &got);
    CaseResult {
        case_id: case.id.clone(),
        category: case.category,
        retrieval_precision: s.retrieval_precision,
        retrieval_recall: s.retrieval_recall,
        pinned_coverage: s.pinned_coverage,
        question_precision: s.question_precision,
        question_recall: s.question_recall,
        pass: s.pass,
        pass_type: pass_type(expected, s.pass),
        latency_ms,
        violations: s.violations,
        returned: Some(got),
        turns: Vec::new(),
    }
}

fn run_session(h: &mut Harness<'_>, case: &BenchCase) -> Result<CaseResult, ProviderError> {
    h.provider.reset()?;
    h.fresh()?;
    let mut turns = Vec::new();
    for (i, turn) in case.session.iter().flatten().enumerate() {
        h.add(&turn.create_beliefs)?;
        for update in &turn.alias_updates {
            let proposal = update.proposal();
            h.provider.update_alias(&proposal)?;
            enrich_alias(&h.catalog, &proposal)?;
        }
        for step in &turn.supersede {
            h.provider.supersede(&step.old, &step.new)?;
            h.catalog.supersede(&step.old, &step.new)?;
        }
        let (got, ms) = h.retrieve(&request(&turn.query, case, turn.active_scope.as_ref()))?;
        let s = score_tiers(&turn.expected, &got);
        let drift = turn.drift_label.as_ref().map(|_| drift_score(&got, &case.drift_origin));
        turns.push(TurnResult {
            turn: i + 1,
            query: turn.query.clone(),
            pass: s.pass,
            latency_ms: ms,
            drift_label: turn.drift_label.clone(),
            drift_score: drift,
            violations: s.violations,
            returned: got,
        });
    }
    // A labelled re-entry turn must be free of drift to pass.
    let mut violations = Vec::new();
    for t in &turns {
        for v in &t.violations {
            violations.push(super::score::Violation {
                assertion: format!("turn {}: {}", t.turn, v.assertion),
                ids: v.ids.clone(),
            });
        }
        if t.drift_score.is_some_and(|d| d > 0.0) {
            violations.push(super::score::Violation {
                assertion: format!("turn {}: drift", t.turn),
                ids: t.returned.relevant_beliefs.iter().map(ToString::to_string).collect(),
            });
        }
    }
    let pass = violations.is_empty();
    let latency = turns.iter().map(|t| t.latency_ms).sum::<f64>() / turns.len().max(1) as f64;
    Ok(CaseResult {
        case_id: case.id.clone(),
        category: case.category,
        retrieval_precision: None,
        retrieval_recall: None,
        pinned_coverage: None,
        question_precision: None,
        question_recall: None,
        pass,
        pass_type: if pass { PassType::Structural } else { PassType::Fail },
        latency_ms: latency,
        violations,
        returned: None,
        turns,
    })
}

/// Runs every case against `provider`. The corpus is ingested and confirmed
/// queryable before the first retrieval; session cases each start from a
/// freshly reset and re-seeded provider.
pub fn run_suite(cases: &[BenchCase], corpus: &[Belief], provider: &mut dyn Provider) -> Result<SuiteReport, ProviderError> {
    let name = provider.name().to_string();
    let mut h = Harness {
        provider,
        catalog: Store::in_memory(),
        corpus,
    };
    h.provider.reset()?;
    let ingest_ms = h.fresh()?;

    let mut results = Vec::with_capacity(cases.len());
    let mut single = Vec::new();
    for case in cases.iter().filter(|c| !c.is_session()) {
        let (got, ms) = h.retrieve(&request(&case.query, case, None))?;
        single.push(ms);
        results.push(single_result(case, &case.expected, got, ms));
    }
    let mut session = Vec::new();
    for case in cases.iter().filter(|c| c.is_session()) {
        let r = run_session(&mut h, case)?;
        session.extend(r.turns.iter().map(|t| t.latency_ms));
        results.push(r);
    }
    let order: BTreeMap<&str, usize> = cases.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
    results.sort_by_key(|r| order[r.case_id.as_str()]);

    let mut categories = Vec::new();
    let present: BTreeSet<Category> = cases.iter().map(|c| c.category).collect();
    for cat in Category::ALL.into_iter().filter(|c| present.contains(c)) {
        let of: Vec<&CaseResult> = results.iter().filter(|r| r.category == cat).collect();
        categories.push(CategorySummary {
            category: cat,
            cases: of.len(),
            passed: of.iter().filter(|r| r.pass).count(),
        });
    }
    let count = |rs: &mut dyn Iterator<Item = &CaseResult>| {
        let mut m: BTreeMap<PassType, usize> = PassType::ALL.iter().map(|t| (*t, 0)).collect();
        for r in rs {
            *m.entry(r.pass_type).or_default() += 1;
        }
        m
    };
    let pass_types = count(&mut results.iter());
    let pass_types_non_session = count(&mut results.iter().filter(|r| r.category != Category::Session));

    let active: Vec<&CaseResult> = cases
        .iter()
        .zip(&results)
        .filter(|(c, _)| c.expected.asserts_precision() && !c.is_session())
        .map(|(_, r)| r)
        .collect();
    let drift = results
        .iter()
        .flat_map(|r| {
            r.turns.iter().filter_map(move |t| {
                Some(DriftEntry {
                    case_id: r.case_id.clone(),
                    turn: t.turn,
                    label: t.drift_label.clone()?,
                    score: t.drift_score?,
                })
            })
        })
        .collect();

    Ok(SuiteReport {
        provider: name,
        case_count: results.len(),
        passed: results.iter().filter(|r| r.pass).count(),
        ingest_ms,
        categories,
        pass_types,
        pass_types_non_session,
        active_precision: MetricMean::of(active.iter().map(|r| r.retrieval_precision)),
        active_recall: MetricMean::of(active.iter().map(|r| r.retrieval_recall)),
        retrieval_precision: MetricMean::of(results.iter().map(|r| r.retrieval_precision)),
        retrieval_recall: MetricMean::of(results.iter().map(|r| r.retrieval_recall)),
        pinned_coverage: MetricMean::of(results.iter().map(|r| r.pinned_coverage)),
        question_precision: MetricMean::of(results.iter().map(|r| r.question_precision)),
        question_recall: MetricMean::of(results.iter().map(|r| r.question_recall)),
        latency_single_turn: LatencySummary::of(&single),
        latency_session_turn: LatencySummary::of(&session),
        drift,
        results,
    })
}
