//! JSON-over-HTTP binding of the dialog engine.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use avatarqa_core::bundle::EngineBundle;
use avatarqa_core::dialog::{apply_step, new_session, AgentResponse, Session, Step};
use avatarqa_core::ground::{PointEvent, Region};
use avatarqa_core::Error as EngineError;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::transcript::TranscriptLog;

/// Machine-readable error codes. This set is closed: clients may match on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    EmptyUtterance,
    SessionNotFound,
    AwaitingConfirmation,
    NotAwaitingConfirmation,
    UnknownRegion,
    RegionNotOnSide,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::EmptyUtterance | ErrorCode::BadRequest | ErrorCode::RegionNotOnSide => StatusCode::BAD_REQUEST,
            ErrorCode::SessionNotFound | ErrorCode::UnknownRegion => StatusCode::NOT_FOUND,
            ErrorCode::AwaitingConfirmation | ErrorCode::NotAwaitingConfirmation => StatusCode::CONFLICT,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match e {
            EngineError::EmptyUtterance => ErrorCode::EmptyUtterance,
            EngineError::AwaitingConfirmation => ErrorCode::AwaitingConfirmation,
            EngineError::NotAwaitingConfirmation => ErrorCode::NotAwaitingConfirmation,
            EngineError::UnknownRegion(_) => ErrorCode::UnknownRegion,
            EngineError::RegionNotOnSide { .. } => ErrorCode::RegionNotOnSide,
            _ => {
                tracing::error!(error = %e, "engine failure");
                return ApiError::new(ErrorCode::Internal, "internal error");
            }
        };
        ApiError::new(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfirmRequest {
    pub affirmed: bool,
}

/// Live sessions. The outer lock only guards the map; each session has its
/// own lock so turns of one session are serialized while others proceed.
#[derive(Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn create(&self) -> String {
        let session = new_session();
        let id = session.id().to_string();
        self.sessions.lock().expect("session map poisoned").insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    pub fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.lock().expect("session map poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct AppState {
    pub bundle: EngineBundle,
    pub sessions: SessionStore,
    pub log: Option<TranscriptLog>,
}

impl AppState {
    pub fn new(bundle: EngineBundle, log: Option<TranscriptLog>) -> Self {
        Self { bundle, sessions: SessionStore::default(), log }
    }

    fn run(&self, id: &str, step: Step) -> Result<AgentResponse, ApiError> {
        let session = self
            .sessions
            .get(id)
            .ok_or_else(|| ApiError::new(ErrorCode::SessionNotFound, format!("no session {id:?}")))?;
        let mut session = session.lock().map_err(|_| ApiError::new(ErrorCode::Internal, "internal error"))?;
        let response = apply_step(&self.bundle, &mut session, &step)?;
        if let Some(log) = &self.log {
            log.record(id, &step, &response);
        }
        Ok(response)
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/avatar/regions", get(regions))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/message", post(message))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/point", post(point))
        .fallback(|| async { ApiError::new(ErrorCode::BadRequest, "no such endpoint") })
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn regions(State(state): State<SharedState>) -> Json<Vec<Region>> {
    Json(state.bundle.lexicon.regions().to_vec())
}

async fn create_session(State(state): State<SharedState>) -> (StatusCode, Json<Created>) {
    (StatusCode::CREATED, Json(Created { session_id: state.sessions.create() }))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(ErrorCode::BadRequest, format!("invalid request body: {e}")))
}

async fn message(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AgentResponse>, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(EngineError::EmptyUtterance.into());
    }
    let request: MessageRequest = parse(&body)?;
    Ok(Json(state.run(&id, Step::Say { text: request.text })?))
}

async fn confirm(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AgentResponse>, ApiError> {
    let request: ConfirmRequest = parse(&body)?;
    Ok(Json(state.run(&id, Step::Confirm { affirmed: request.affirmed })?))
}

async fn point(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<AgentResponse>, ApiError> {
    let event: PointEvent = parse(&body)?;
    Ok(Json(state.run(&id, Step::Point(event))?))
}
