//! HTTP endpoints.
//!
//! | route | body |
//! |---|---|
//! | `POST /api/chat` | `{session_id?, text}` → `{session_id, reply_text, intent, payload, needs_clarification, turn}` |
//! | `POST /api/predict` | `{train, date, station?, ci_level?, model_kind?}` → journey prediction |
//! | `GET /api/trains` | train list |
//! | `GET /api/trains/{n}/route` | ordered stops |
//! | `GET /api/analytics/{n}/summary?from=&to=` | delay profile and destination statistics |
//! | `GET /api/health` | liveness and model size |
//!
//! Errors are `{error, message, detail?}` with status 400 (malformed
//! request), 404 (unknown train), 409 (station not on route; `detail` lists
//! the route) or 503 (prediction refused by the confidence gate).

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use trainbot_core::analytics::{route_summary, AnalyticsError, DateRange};
use trainbot_core::dialog::{Assistant, Intent, PolicyResult};
use trainbot_core::domain::StationCode;
use trainbot_core::predictor::{
    gate_response, predict_journey, CiLevel, GateDecision, ModelKind, PredictError, PredictionRequest,
};

use crate::sessions::{MemorySessionStore, SessionStore};

#[derive(Clone)]
pub struct AppState {
    pub assistant: Arc<Assistant>,
    pub sessions: Arc<MemorySessionStore>,
}

impl AppState {
    pub fn new(assistant: Assistant, sessions: MemorySessionStore) -> Self {
        AppState {
            assistant: Arc::new(assistant),
            sessions: Arc::new(sessions),
        }
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/chat", post(chat))
        .route("/api/predict", post(predict))
        .route("/api/trains", get(trains))
        .route("/api/trains/{number}/route", get(route))
        .route("/api/analytics/{number}/summary", get(summary))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .with_state(state)
}

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            error: code.to_string(),
            message: message.into(),
            detail: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        let message = e.to_string();
        match e {
            PredictError::UnknownTrain(_) => ApiError::new(StatusCode::NOT_FOUND, e.code(), message),
            PredictError::StationNotOnRoute { ref route, .. } => {
                let route = route.clone();
                ApiError::new(StatusCode::CONFLICT, e.code(), message).with_detail(json!({ "stations": route }))
            }
            PredictError::BadCiLevel(_) => ApiError::new(StatusCode::BAD_REQUEST, e.code(), message),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), message),
        }
    }
}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let status = match e {
            AnalyticsError::UnknownTrain(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

fn parse_date(field: &str, s: &str) -> Result<NaiveDate, ApiError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| ApiError::bad_request(format!("{field} must be a YYYY-MM-DD date, got {s:?}")))
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    let backend = state.assistant.backend();
    Json(json!({
        "status": "ok",
        "trains": backend.catalog.trains.len(),
        "bundles": backend.registry.n_bundles(),
        "sessions": state.sessions.len(),
    }))
}

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub reply_text: String,
    pub intent: Intent,
    pub payload: PolicyResult,
    pub needs_clarification: bool,
    pub turn: u64,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn chat(
    State(state): State<AppState>,
    body: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<Json<ChatResponse>, ApiError> {
    let Json(req) = body?;
    let session_id = match req.session_id {
        Some(id) if !valid_session_id(&id) => {
            return Err(ApiError::bad_request("session_id must be 1-128 letters, digits, '-' or '_'"));
        }
        Some(id) => id,
        None => MemorySessionStore::new_session_id(),
    };
    let assistant = state.assistant.clone();
    let sessions = state.sessions.clone();
    let response = tokio::task::spawn_blocking(move || {
        sessions.with_session(&session_id, |session| {
            let (response, next) = assistant.step(&session.context, &req.text);
            session.context = next;
            ChatResponse {
                session_id: session.session_id.clone(),
                reply_text: response.text,
                intent: response.intent,
                payload: response.payload,
                needs_clarification: response.needs_clarification,
                turn: session.context.turn_count,
            }
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(Json(response))
}

#[derive(Debug, Deserialize)]
pub struct PredictBody {
    pub train: String,
    pub date: String,
    #[serde(default)]
    pub station: Option<String>,
    #[serde(default)]
    pub ci_level: Option<u32>,
    #[serde(default)]
    pub model_kind: Option<String>,
}

async fn predict(
    State(state): State<AppState>,
    body: Result<Json<PredictBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let policy = &state.assistant.config().policy;
    let request = PredictionRequest {
        train_number: req.train.clone(),
        date: parse_date("date", &req.date)?,
        station: req.station.map(StationCode::new),
        ci_level: match req.ci_level {
            Some(p) => CiLevel::try_from(p)?,
            None => policy.ci_level,
        },
        model_kind: match req.model_kind {
            Some(k) => k.parse::<ModelKind>().map_err(ApiError::bad_request)?,
            None => policy.model_kind,
        },
    };
    let backend = state.assistant.backend();
    let prediction = predict_journey(&backend.registry, &backend.catalog, &request)?;
    if let GateDecision::Refuse(reason) = gate_response(&prediction, &policy.gate) {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            reason.code(),
            "the prediction is not reliable enough to present",
        )
        .with_detail(serde_json::to_value(reason).expect("serialisable")));
    }
    Ok(Json(prediction).into_response())
}

#[derive(Debug, Serialize)]
struct TrainEntry<'a> {
    train_number: &'a str,
    train_name: &'a str,
    known: bool,
    modelled: bool,
    origin: &'a StationCode,
    destination: &'a StationCode,
    n_stops: usize,
}

async fn trains(State(state): State<AppState>) -> Json<Value> {
    let backend = state.assistant.backend();
    let list: Vec<TrainEntry> = backend
        .catalog
        .trains
        .values()
        .map(|t| TrainEntry {
            train_number: &t.train_number,
            train_name: &t.train_name,
            known: t.known,
            modelled: backend.registry.is_modelled(&t.train_number),
            origin: &t.origin().station,
            destination: &t.destination().station,
            n_stops: t.stops.len(),
        })
        .collect();
    Json(json!({ "trains": list }))
}

async fn route(State(state): State<AppState>, Path(number): Path<String>) -> Result<Json<Value>, ApiError> {
    let catalog = &state.assistant.backend().catalog;
    let t = catalog
        .train(&number)
        .ok_or_else(|| ApiError::from(PredictError::UnknownTrain(number.clone())))?;
    let stops: Vec<Value> = t
        .stops
        .iter()
        .map(|s| {
            json!({
                "stop_index": s.stop_index,
                "station_code": s.station,
                "station_name": catalog.station_name(&s.station).unwrap_or_default(),
                "day_offset": s.day_offset,
                "arrival_min": s.sched_arrival_min,
                "departure_min": s.sched_departure_min,
                "distance_km": s.distance_km,
            })
        })
        .collect();
    Ok(Json(json!({
        "train_number": t.train_number,
        "train_name": t.train_name,
        "known": t.known,
        "stops": stops,
    })))
}

#[derive(Debug, Deserialize)]
pub struct RangeQuery {
    pub from: Option<String>,
    pub to: Option<String>,
}

async fn summary(
    State(state): State<AppState>,
    Path(number): Path<String>,
    query: Result<Query<RangeQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<Value>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let range = DateRange {
        from: q.from.as_deref().filter(|s| !s.is_empty()).map(|s| parse_date("from", s)).transpose()?,
        to: q.to.as_deref().filter(|s| !s.is_empty()).map(|s| parse_date("to", s)).transpose()?,
    };
    let backend = state.assistant.backend();
    let config = state.assistant.config().policy.analytics;
    let summary = route_summary(&backend.catalog, backend.history(&number), &number, range, &config)?;
    let names: Vec<&str> = summary
        .profile
        .stations
        .iter()
        .map(|s| backend.catalog.station_name(s).unwrap_or_default())
        .collect();
    let mut body = serde_json::to_value(&summary).expect("serialisable");
    body["station_names"] = json!(names);
    Ok(Json(body))
}
