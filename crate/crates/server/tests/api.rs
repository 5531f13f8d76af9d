//! HTTP API through the router, without a socket.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use belief_store::bench::build_seed_corpus;
use belief_store::store::LOG_FILE;
use belief_store::{
    compact, enrich_alias, merge, AliasProposal, Belief, BeliefType, ManualClock, Resolution, ScopeLabel, Store,
    StoreOptions, Timestamp,
};
use belief_store_server::api::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn t0() -> Timestamp {
    Timestamp::from_millis(1_767_600_000_000)
}

fn clocked_store(dir: &std::path::Path) -> Store {
    Store::open_with(dir, StoreOptions::with_clock(Arc::new(ManualClock::with_step(t0(), 1000)))).unwrap()
}

fn app(store: Store) -> Router {
    router(AppState::new(Arc::new(store), 10))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn decision(id: &str, canonical: &str, aliases: &[&str], content: &str) -> Belief {
    Belief::builder(id, "u1", BeliefType::Decision, canonical)
        .aliases(aliases.iter().copied())
        .content(content)
        .why_it_matters("Shared tooling.")
        .scope(ScopeLabel::domain("code"))
        .build(t0())
}

fn ids(v: &Value, tier: &str) -> Vec<String> {
    v[tier].as_array().unwrap().iter().map(|b| b["_id"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn health_reports_generation() {
    let app = app(Store::in_memory());
    let (s, v) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["generation"], 0);
    assert_eq!(v["status"], "ok");
    assert!(v["uptime_ms"].is_u64());
}

#[tokio::test]
async fn cold_start_retrieve_is_empty() {
    let store = Store::in_memory();
    store.write(|tx| build_seed_corpus().into_iter().try_for_each(|b| tx.insert(b))).unwrap();
    let app = app(store);
    let body = json!({"query": "how do I configure k8s ingress", "user_id": "u-new", "active_scope": "domain:code"});
    let (s, v) = call(&app, Method::POST, "/v1/retrieve", Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    for tier in ["pinned_facts", "relevant_beliefs", "open_questions"] {
        assert!(ids(&v, tier).is_empty(), "{tier}");
    }
    assert_eq!(v["persona_prelude"], "");
}

#[tokio::test]
async fn retrieve_uses_default_budget_and_explicit_budget() {
    let store = Store::in_memory();
    store.write(|tx| build_seed_corpus().into_iter().try_for_each(|b| tx.insert(b))).unwrap();
    let app = app(store);
    let body = json!({"query": "how do I configure k8s ingress", "user_id": "u-primary", "active_scope": "domain:code"});
    let (_, v) = call(&app, Method::POST, "/v1/retrieve", Some(body.clone())).await;
    assert_eq!(ids(&v, "relevant_beliefs").first().map(String::as_str), Some("b-kubernetes-entity"));
    let mut zero = body;
    zero["max_beliefs"] = json!(0);
    let (_, v) = call(&app, Method::POST, "/v1/retrieve", Some(zero)).await;
    assert!(ids(&v, "relevant_beliefs").is_empty());
}

#[tokio::test]
async fn invalid_belief_is_422_with_violations() {
    let app = app(Store::in_memory());
    let mut b = serde_json::to_value(decision("p1", "test_runner", &["vitest", "runner", "tests"], "Use Vitest.")).unwrap();
    b["canonical_name"] = json!("Not Snake");
    b["aliases"] = json!(["one"]);
    b["content"] = json!("");
    let (s, v) = call(&app, Method::POST, "/v1/beliefs", Some(b)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_belief");
    let violations = v["violations"].as_array().unwrap();
    assert_eq!(violations.len(), 3, "{violations:?}");
}

#[tokio::test]
async fn malformed_json_is_400() {
    let app = app(Store::in_memory());
    let (s, v) = call(&app, Method::POST, "/v1/retrieve", Some(json!({"query": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");
    assert_eq!(v["violations"], json!([]));
}

#[tokio::test]
async fn error_statuses() {
    let app = app(Store::in_memory());
    let (s, _) = call(&app, Method::GET, "/v1/beliefs/nope/audit", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    for (id, name) in [("a", "lint_tool"), ("b", "lint_tool_v2"), ("c", "lint_tool_v3")] {
        let b = serde_json::to_value(decision(id, name, &["linter", "lint rules", id], "Lint.")).unwrap();
        let (s, _) = call(&app, Method::POST, "/v1/beliefs?mode=put", Some(b)).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let (s, _) = call(&app, Method::POST, "/v1/beliefs/a/supersede", Some(json!({"new_id": "b"}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = call(&app, Method::POST, "/v1/beliefs/a/supersede", Some(json!({"new_id": "c"}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    let (s, _) = call(&app, Method::POST, "/v1/conflicts/c-99/resolve", Some(json!({"action": "keep_existing"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, Method::GET, "/v1/prelude", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn conflict_lifecycle_and_prelude() {
    let app = app(Store::in_memory());
    let first = serde_json::to_value(decision("p1", "test_runner", &["vitest", "test runner", "unit tests"], "Use Vitest.")).unwrap();
    let (_, v) = call(&app, Method::POST, "/v1/beliefs", Some(first)).await;
    assert_eq!(v["action"], "insert_new");
    let second = serde_json::to_value(decision("p2", "test_runner", &["jest", "test runner", "unit tests"], "Use Jest.")).unwrap();
    let (_, v) = call(&app, Method::POST, "/v1/beliefs", Some(second)).await;
    assert_eq!(v["action"], "queue_conflict");
    let cid = v["conflict_id"].as_str().unwrap().to_string();

    let (_, list) = call(&app, Method::GET, "/v1/conflicts?user_id=u1", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (s, rec) = call(&app, Method::POST, &format!("/v1/conflicts/{cid}/resolve"), Some(json!({"action": "accept_incoming"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rec["status"], "resolved_accept_incoming");
    let (_, list) = call(&app, Method::GET, "/v1/conflicts", None).await;
    assert!(list.as_array().unwrap().is_empty());

    let (_, audit) = call(&app, Method::GET, "/v1/beliefs/p1/audit", None).await;
    assert!(audit.as_array().unwrap().iter().any(|e| e["kind"] == "superseded"));
    let (s, p) = call(&app, Method::GET, "/v1/prelude?user_id=u1", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(p["prelude"], "");
}

/// The same call sequence through the API and through the library, each on
/// its own manual clock, must leave byte-identical logs.
#[tokio::test]
async fn api_log_matches_library_log() {
    let lib_dir = tempfile::tempdir().unwrap();
    let api_dir = tempfile::tempdir().unwrap();
    let b1 = decision("p1", "test_runner", &["vitest", "unit suite", "runner"], "Use Vitest.");
    let b2 = decision("p2", "test_runner", &["vitest", "vi mocks", "spec files"], "Use Vitest.");
    let b3 = decision("p3", "lint_tool", &["eslint", "linter", "lint rules"], "Use ESLint.");
    let b4 = decision("p4", "lint_tool", &["biome", "linter", "formatter"], "Use Biome.");
    let b5 = decision("p5", "lint_tool_v2", &["biome", "formatter", "lint format"], "Use Biome.");

    {
        let lib = clocked_store(lib_dir.path());
        lib.put(b1.clone()).unwrap();
        lib.put(b2.clone()).unwrap();
        merge(&lib, b3.clone()).unwrap();
        let verdict = merge(&lib, b4.clone()).unwrap();
        lib.resolve_conflict(verdict.conflict_id.as_deref().unwrap(), Resolution::KeepExisting).unwrap();
        lib.put(b5.clone()).unwrap();
        lib.supersede(&"p3".into(), &"p5".into()).unwrap();
        enrich_alias(&lib, &AliasProposal::new("p5", "eslintrc").counter_signal()).unwrap();
        compact(&lib, "u1").unwrap();
    }

    {
        let app = app(clocked_store(api_dir.path()));
        let v = |b: &Belief| Some(serde_json::to_value(b).unwrap());
        call(&app, Method::POST, "/v1/beliefs?mode=put", v(&b1)).await;
        call(&app, Method::POST, "/v1/beliefs?mode=put", v(&b2)).await;
        call(&app, Method::POST, "/v1/beliefs?mode=merge", v(&b3)).await;
        let (_, verdict) = call(&app, Method::POST, "/v1/beliefs", v(&b4)).await;
        let cid = verdict["conflict_id"].as_str().unwrap();
        call(&app, Method::POST, &format!("/v1/conflicts/{cid}/resolve"), Some(json!({"action": "keep_existing"}))).await;
        call(&app, Method::POST, "/v1/beliefs?mode=put", v(&b5)).await;
        call(&app, Method::POST, "/v1/beliefs/p3/supersede", Some(json!({"new_id": "p5"}))).await;
        let (s, _) = call(&app, Method::POST, "/v1/beliefs/p5/aliases", Some(json!({"surface_form": "eslintrc", "is_counter_signal": true}))).await;
        assert_eq!(s, StatusCode::OK);
        let (_, report) = call(&app, Method::POST, "/v1/compact", Some(json!({"user_id": "u1"}))).await;
        assert_eq!(report["merged"].as_array().unwrap().len(), 1);
    }

    let lib_log = std::fs::read(lib_dir.path().join(LOG_FILE)).unwrap();
    let api_log = std::fs::read(api_dir.path().join(LOG_FILE)).unwrap();
    assert!(lib_log.iter().filter(|&&c| c == b'\n').count() > 8);
    assert_eq!(String::from_utf8(api_log).unwrap(), String::from_utf8(lib_log).unwrap());
}

/// Writers and readers race; every retrieval must see a whole generation:
/// exactly as many matching beliefs as that generation has committed.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn retrieval_never_sees_torn_state() {
    let app = app(Store::in_memory());
    let writers = (0..40).map(|i| {
        let app = app.clone();
        tokio::spawn(async move {
            let b = decision(&format!("w{i}"), &format!("widget_{i}"), &["widget", &format!("part {i}"), &format!("piece {i}")], "Widget.");
            let (s, _) = call(&app, Method::POST, "/v1/beliefs?mode=put", Some(serde_json::to_value(b).unwrap())).await;
            assert_eq!(s, StatusCode::CREATED);
        })
    });
    let readers = (0..200).map(|_| {
        let app = app.clone();
        tokio::spawn(async move {
            let body = json!({"query": "widget", "user_id": "u1", "active_scope": "domain:code", "max_beliefs": 100});
            let (s, v) = call(&app, Method::POST, "/v1/retrieve", Some(body)).await;
            assert_eq!(s, StatusCode::OK);
            assert_eq!(ids(&v, "relevant_beliefs").len() as u64, v["generation"].as_u64().unwrap());
        })
    });
    let handles: Vec<_> = writers.chain(readers).collect();
    for h in handles {
        h.await.unwrap();
    }
    let (_, health) = call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!(health["generation"], 40);
}
