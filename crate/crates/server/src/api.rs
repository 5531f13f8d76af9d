//! HTTP surface. Every mutation maps onto exactly one library call, so a
//! request sequence leaves the same log as the equivalent calls in-process.

use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use belief_store::lifecycle::EnrichOutcome;
use belief_store::{
    compact, enrich_alias, merge, AliasProposal, Belief, BeliefId, ChangeEvent, CompactionReport, ConflictRecord,
    HardFilters, MergeVerdict, Provenance, PutOutcome, Resolution, RetrievalContext, ScopeLabel, Store, StoreError,
};
use serde::{Deserialize, Serialize};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub default_max_beliefs: usize,
    pub started: Instant,
}

impl AppState {
    pub fn new(store: Arc<Store>, default_max_beliefs: usize) -> Self {
        Self {
            store,
            default_max_beliefs,
            started: Instant::now(),
        }
    }
}

/// Wire error: `{code, message, violations[]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub violations: Vec<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                violations: Vec::new(),
            },
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StoreError::*;
        let (status, code) = match &e {
            Invalid { .. } | EmptyAlias => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_belief"),
            NotFound(_) | ConflictNotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            DuplicateMismatch(_) | AlreadySuperseded(_) | Cycle { .. } | NotActive(_) | HistoryRewritten(_)
            | DanglingSupersession { .. } | ConflictAlreadyResolved(_) | AliasCeiling(_) => {
                (StatusCode::CONFLICT, "conflict")
            }
            Corrupt { .. } | Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store_failure"),
        };
        let mut err = Self::new(status, code, e.to_string());
        if let Some(v) = e.violations() {
            err.body.violations = v.0.iter().map(ToString::to_string).collect();
        }
        err
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Store calls can touch the disk; keep them off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/beliefs", post(post_belief))
        .route("/v1/beliefs/{id}", get(get_belief))
        .route("/v1/beliefs/{id}/supersede", post(supersede))
        .route("/v1/beliefs/{id}/aliases", post(add_alias))
        .route("/v1/beliefs/{id}/audit", get(audit))
        .route("/v1/retrieve", post(retrieve))
        .route("/v1/conflicts", get(conflicts))
        .route("/v1/conflicts/{id}/resolve", post(resolve))
        .route("/v1/compact", post(compact_user))
        .route("/v1/prelude", get(prelude))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub generation: u64,
    pub beliefs: usize,
    pub uptime_ms: u64,
}

async fn health(State(s): State<AppState>) -> Json<Health> {
    let view = s.store.view();
    Json(Health {
        status: "ok".into(),
        generation: view.generation(),
        beliefs: view.len(),
        uptime_ms: s.started.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    /// Extraction path: insert, reinforce, queue a conflict or skip.
    #[default]
    Merge,
    /// Import path: store the belief verbatim.
    Put,
}

#[derive(Debug, Default, Deserialize)]
pub struct IngestParams {
    #[serde(default)]
    pub mode: IngestMode,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IngestResponse {
    Merge(MergeVerdict),
    Put { outcome: PutOutcome },
}

async fn post_belief(
    State(s): State<AppState>,
    Query(p): Query<IngestParams>,
    body: Result<Json<Belief>, JsonRejection>,
) -> Result<(StatusCode, Json<IngestResponse>), ApiError> {
    let Json(belief) = body?;
    let store = s.store.clone();
    let resp = match p.mode {
        IngestMode::Merge => IngestResponse::Merge(blocking(move || merge(&store, belief)).await?),
        IngestMode::Put => IngestResponse::Put {
            outcome: blocking(move || store.put(belief)).await?,
        },
    };
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn get_belief(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Belief> {
    let id = BeliefId::new(id);
    s.store.get(&id).map(Json).ok_or_else(|| StoreError::NotFound(id).into())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SupersedeRequest {
    pub new_id: BeliefId,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub generation: u64,
}

async fn supersede(
    State(s): State<AppState>,
    Path(old): Path<String>,
    body: Result<Json<SupersedeRequest>, JsonRejection>,
) -> ApiResult<GenerationResponse> {
    let Json(req) = body?;
    let store = s.store.clone();
    let generation = blocking(move || store.supersede(&BeliefId::new(old), &req.new_id)).await?;
    Ok(Json(GenerationResponse { generation }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AliasRequest {
    pub surface_form: String,
    #[serde(default)]
    pub is_counter_signal: bool,
    #[serde(default)]
    pub observed_in: Option<Provenance>,
}

async fn add_alias(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AliasRequest>, JsonRejection>,
) -> ApiResult<EnrichOutcome> {
    let Json(req) = body?;
    let proposal = AliasProposal {
        belief_id: BeliefId::new(id),
        surface_form: req.surface_form,
        observed_in: req.observed_in,
        is_counter_signal: req.is_counter_signal,
    };
    let store = s.store.clone();
    Ok(Json(blocking(move || enrich_alias(&store, &proposal)).await?))
}

async fn audit(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<ChangeEvent>> {
    Ok(Json(s.store.list_audit(&BeliefId::new(id))?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RetrieveBody {
    pub query: String,
    pub user_id: String,
    pub active_scope: ScopeLabel,
    #[serde(default)]
    pub max_beliefs: Option<usize>,
}

async fn retrieve(
    State(s): State<AppState>,
    body: Result<Json<RetrieveBody>, JsonRejection>,
) -> ApiResult<RetrievalContext> {
    let Json(req) = body?;
    let filters = HardFilters::new(req.user_id, req.active_scope);
    let budget = req.max_beliefs.unwrap_or(s.default_max_beliefs);
    Ok(Json(s.store.retrieve(&req.query, &filters, budget)))
}

#[derive(Debug, Deserialize)]
pub struct UserParam {
    #[serde(default)]
    pub user_id: Option<String>,
}

async fn conflicts(State(s): State<AppState>, Query(p): Query<UserParam>) -> ApiResult<Vec<ConflictRecord>> {
    Ok(Json(s.store.pending_conflicts(p.user_id.as_deref())))
}

async fn resolve(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Resolution>, JsonRejection>,
) -> ApiResult<ConflictRecord> {
    let Json(resolution) = body?;
    let store = s.store.clone();
    Ok(Json(blocking(move || store.resolve_conflict(&id, resolution)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompactRequest {
    pub user_id: String,
}

async fn compact_user(
    State(s): State<AppState>,
    body: Result<Json<CompactRequest>, JsonRejection>,
) -> ApiResult<CompactionReport> {
    let Json(req) = body?;
    let store = s.store.clone();
    Ok(Json(blocking(move || compact(&store, &req.user_id)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreludeResponse {
    pub user_id: String,
    pub prelude: String,
}

async fn prelude(State(s): State<AppState>, Query(p): Query<UserParam>) -> ApiResult<PreludeResponse> {
    let user_id = p
        .user_id
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "user_id query parameter is required"))?;
    let prelude = s.store.prelude(&user_id);
    Ok(Json(PreludeResponse { user_id, prelude }))
}
