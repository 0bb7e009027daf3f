//! HTTP session server.
//!
//! The server owns every episode; clients hold only a session id. Each
//! session sits behind its own async mutex, so concurrent requests to one
//! session run one at a time while different sessions proceed in parallel.
//!
//! | method | path                              | body                                   |
//! |--------|-----------------------------------|----------------------------------------|
//! | GET    | `/v1/scenarios`                   |                                        |
//! | POST   | `/v1/sessions`                    | `{scenario_id?, seed?, horizon?, client_kind?, agent_label?}` |
//! | GET    | `/v1/sessions/{id}`               |                                        |
//! | POST   | `/v1/sessions/{id}/tools`         | `{name, params?, month?}`              |
//! | POST   | `/v1/sessions/{id}/memory`        | `{operation, ..., month?}`             |
//! | POST   | `/v1/sessions/{id}/action`        | `{name, params?, month?}`              |
//! | GET    | `/v1/sessions/{id}/transcript`    | line-delimited JSON                    |
//!
//! The optional `month` field pins a request to the month the client
//! believes is current; a stale month is rejected instead of silently
//! applying to the next one. Errors are `{code, message, budget_remaining,
//! month}` with a matching HTTP status.

mod error;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use arena_core::engine::{ActionOutcome, Next, Phase};
use arena_core::memory::MemoryResult;
use arena_core::{
    Action, EngineError, Episode, EpisodeConfig, MemoryOp, Money, ScenarioCatalog, TerminalSummary,
    ToolCall, ToolResult,
};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;
use tower_http::trace::TraceLayer;

pub use error::ApiError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    Human,
    #[default]
    Agent,
}

pub struct Session {
    pub id: String,
    pub episode: Episode,
    pub created_at: u64,
    pub client_kind: ClientKind,
}

#[derive(Clone)]
pub struct AppState {
    catalog: Arc<ScenarioCatalog>,
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
    transcript_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(catalog: ScenarioCatalog) -> Self {
        AppState {
            catalog: Arc::new(catalog),
            sessions: Arc::default(),
            transcript_dir: None,
        }
    }

    /// Finished episodes are written to `<dir>/<session id>.jsonl`.
    pub fn with_transcript_dir(mut self, dir: PathBuf) -> Self {
        self.transcript_dir = Some(dir);
        self
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::session_not_found(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/scenarios", get(list_scenarios))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/tools", post(post_tool))
        .route("/v1/sessions/{id}/memory", post(post_memory))
        .route("/v1/sessions/{id}/action", post(post_action))
        .route("/v1/sessions/{id}/transcript", get(get_transcript))
        .layer(CorsLayer::permissive())
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Serialize)]
struct ScenarioInfo {
    id: String,
    horizon: u32,
    company: String,
    initial_cash: Money,
}

#[derive(Serialize)]
struct ScenarioList {
    scenarios: Vec<ScenarioInfo>,
}

async fn list_scenarios(State(state): State<AppState>) -> Json<ScenarioList> {
    let scenarios = state
        .catalog
        .iter()
        .map(|s| ScenarioInfo {
            id: s.id.clone(),
            horizon: s.horizon,
            company: s.initial_company.name.clone(),
            initial_cash: s.initial_company.initial_cash,
        })
        .collect();
    Json(ScenarioList { scenarios })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default = "default_scenario_id")]
    pub scenario_id: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon: Option<u32>,
    #[serde(default)]
    pub client_kind: ClientKind,
    #[serde(default)]
    pub agent_label: Option<String>,
}

fn default_scenario_id() -> String {
    "default".into()
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    scenario_id: String,
    seed: u64,
    #[serde(flatten)]
    next: Next,
}

fn parse_body<T: serde::de::DeserializeOwned>(
    body: Result<Json<Value>, JsonRejection>,
) -> Result<T, ApiError> {
    let Json(value) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    serde_json::from_value(value).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateSession = parse_body(body)?;
    let config = EpisodeConfig {
        scenario_id: req.scenario_id.clone(),
        seed: req.seed,
        horizon: req.horizon,
        agent_label: req
            .agent_label
            .unwrap_or_else(|| format!("{:?}", req.client_kind).to_lowercase()),
    };
    let mut episode = Episode::from_catalog(config, &state.catalog).map_err(ApiError::bare)?;
    let next = episode.start().map_err(ApiError::bare)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let session = Session {
        id: id.clone(),
        episode,
        created_at,
        client_kind: req.client_kind,
    };
    state
        .sessions
        .write()
        .expect("session table lock")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %id, scenario = %req.scenario_id, seed = req.seed, "session created");
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: id,
            scenario_id: req.scenario_id,
            seed: req.seed,
            next,
        }),
    ))
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    scenario_id: String,
    seed: u64,
    client_kind: ClientKind,
    created_at: u64,
    month: u32,
    month_label: String,
    budget_remaining: u32,
    alive: bool,
    phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    terminal: Option<TerminalSummary>,
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionSummary>, ApiError> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    let e = &s.episode;
    Ok(Json(SessionSummary {
        session_id: s.id.clone(),
        scenario_id: e.config().scenario_id.clone(),
        seed: e.config().seed,
        client_kind: s.client_kind,
        created_at: s.created_at,
        month: e.month(),
        month_label: e.month_label(),
        budget_remaining: e.budget_remaining(),
        alive: e.state().alive,
        phase: e.phase(),
        terminal: e.terminal().cloned(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedRequest {
    name: String,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    month: Option<u32>,
}

#[derive(Serialize)]
struct ToolResponse {
    result: ToolResult,
    budget_remaining: u32,
    month: u32,
}

fn check_month(episode: &Episode, month: Option<u32>, is_action: bool) -> Result<(), EngineError> {
    match month {
        Some(m) => episode.expect_month(m, is_action),
        None => Ok(()),
    }
}

async fn post_tool(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<ToolResponse>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let e = &mut s.episode;
    let req: NamedRequest = parse_body(body)?;
    check_month(e, req.month, false).map_err(|err| ApiError::engine(err, e))?;
    let call =
        ToolCall::from_parts(&req.name, req.params).map_err(|err| ApiError::engine(err, e))?;
    let result = e.call_tool(call).map_err(|err| ApiError::engine(err, e))?;
    Ok(Json(ToolResponse {
        result,
        budget_remaining: e.budget_remaining(),
        month: e.month(),
    }))
}

#[derive(Serialize)]
struct MemoryResponse {
    #[serde(flatten)]
    result: MemoryResult,
    month: u32,
}

async fn post_memory(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<MemoryResponse>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let e = &mut s.episode;
    let Json(mut value) = body.map_err(|err| ApiError::bad_request(err.body_text()))?;
    let month = match value.as_object_mut().and_then(|o| o.remove("month")) {
        None | Some(Value::Null) => None,
        Some(m) => Some(
            serde_json::from_value::<u32>(m)
                .map_err(|err| ApiError::bad_request(format!("month: {err}")))?,
        ),
    };
    check_month(e, month, false).map_err(|err| ApiError::engine(err, e))?;
    let op: MemoryOp =
        serde_json::from_value(value).map_err(|err| ApiError::bad_request(err.to_string()))?;
    let result = e.memory(op).map_err(|err| ApiError::engine(err, e))?;
    Ok(Json(MemoryResponse {
        result,
        month: e.month(),
    }))
}

async fn post_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<ActionOutcome>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.lock().await;
    let e = &mut s.episode;
    let req: NamedRequest = parse_body(body)?;
    check_month(e, req.month, true).map_err(|err| ApiError::engine(err, e))?;
    let action =
        Action::from_parts(&req.name, req.params).map_err(|err| ApiError::engine(err, e))?;
    let outcome = e.act(action).map_err(|err| ApiError::engine(err, e))?;
    if e.is_over() {
        if let Some(dir) = &state.transcript_dir {
            let path = dir.join(format!("{}.jsonl", s.id));
            if let Err(err) = s.episode.transcript().write_to(&path) {
                tracing::warn!(path = %path.display(), error = %err, "could not write transcript");
            }
        }
    }
    Ok(Json(outcome))
}

async fn get_transcript(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let session = state.session(&id)?;
    let s = session.lock().await;
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        s.episode.transcript().to_jsonl(),
    ))
}
