//! JSON/SSE API driven by the labeling UI.

use crate::service::{CreateSession, IngestService, ServiceError, SessionEvent};
use crate::session::{Session, SessionFilter, SessionState};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use gaitlab_core::{GaitLabel, SubjectMeta};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::convert::Infallible;
use std::sync::Arc;
use tokio::sync::broadcast;
use tower_http::cors::CorsLayer;

type Svc = Arc<IngestService>;

pub fn router(svc: Svc) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/start", post(start_capture))
        .route("/api/sessions/{id}/events", get(session_events))
        .route("/api/devices/{id}/ping", get(ping_device))
        .layer(CorsLayer::permissive())
        .with_state(svc)
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, svc: Svc) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).await
}

/// Like [`serve`], stopping gracefully once `signal` resolves.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    svc: Svc,
    signal: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).with_graceful_shutdown(signal).await
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ServiceError::Validation { .. } => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::WrongState { .. } | ServiceError::DeviceBusy(_) | ServiceError::DeviceOffline(_) => StatusCode::CONFLICT,
            ServiceError::Bus(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Journal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.0.to_string() });
        if let ServiceError::Validation { field, .. } = &self.0 {
            body["field"] = json!(field);
        }
        (status, Json(body)).into_response()
    }
}

async fn create_session(State(svc): State<Svc>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req = parse_create(&body)?;
    let s = svc.create_session(req)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": s.session_id }))))
}

/// Field-by-field parsing, so a bad request names the offending field.
pub fn parse_create(body: &[u8]) -> Result<CreateSession, ServiceError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| ServiceError::validation("body", e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| ServiceError::validation("body", "expected a JSON object"))?;
    let meta = obj
        .get("meta")
        .and_then(Value::as_object)
        .ok_or_else(|| ServiceError::validation("meta", "expected an object"))?;
    let name = field(meta, "name", Value::as_str, "a string")?;
    let age = field(meta, "age", Value::as_u64, "a positive integer")?;
    let age = u32::try_from(age).map_err(|_| ServiceError::validation("age", "out of range"))?;
    let height = field(meta, "height_cm", Value::as_f64, "a number")?;
    let weight = field(meta, "weight_kg", Value::as_f64, "a number")?;
    let meta = SubjectMeta::new(name, age, height, weight).map_err(|e| {
        let field = match e.field {
            "height" => "height_cm",
            "weight" => "weight_kg",
            f => f,
        };
        ServiceError::validation(field, e.reason)
    })?;
    let label: GaitLabel = field(obj, "label", Value::as_str, "a gait label")?
        .parse()
        .map_err(|e: gaitlab_core::label::UnknownLabel| ServiceError::validation("label", e.to_string()))?;
    let device_id = field(obj, "device_id", Value::as_str, "a string")?.to_string();
    let seed = match obj.get("seed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| ServiceError::validation("seed", "expected a non-negative integer"))?),
    };
    Ok(CreateSession {
        meta,
        label,
        device_id,
        seed,
    })
}

fn field<'a, T>(obj: &'a Map<String, Value>, key: &str, get: impl Fn(&'a Value) -> Option<T>, what: &str) -> Result<T, ServiceError> {
    obj.get(key)
        .and_then(get)
        .ok_or_else(|| ServiceError::validation(key, format!("expected {what}")))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    label: Option<String>,
    state: Option<String>,
    device_id: Option<String>,
}

async fn list_sessions(State(svc): State<Svc>, Query(q): Query<ListQuery>) -> Result<Json<Vec<Session>>, ApiError> {
    let label = q
        .label
        .map(|l| l.parse::<GaitLabel>().map_err(|e| ServiceError::validation("label", e.to_string())))
        .transpose()?;
    let state = q
        .state
        .map(|s| s.parse::<SessionState>().map_err(|e| ServiceError::validation("state", e)))
        .transpose()?;
    let filter = SessionFilter {
        label,
        state,
        device_id: q.device_id,
    };
    Ok(Json(svc.list_sessions(&filter)))
}

async fn get_session(State(svc): State<Svc>, Path(id): Path<String>) -> Result<Json<Session>, ApiError> {
    Ok(Json(svc.get_session(&id)?))
}

async fn start_capture(State(svc): State<Svc>, Path(id): Path<String>) -> Result<(StatusCode, Json<Session>), ApiError> {
    let s = svc.start_capture(&id).await?;
    Ok((StatusCode::ACCEPTED, Json(s)))
}

async fn ping_device(State(svc): State<Svc>, Path(id): Path<String>) -> Response {
    match svc.ping_device(&id).await {
        Ok(r) => Json(json!({ "device_id": id, "state": r.state, "round_trip_ms": r.round_trip_ms })).into_response(),
        Err(ServiceError::DeviceOffline(_)) => (
            StatusCode::GATEWAY_TIMEOUT,
            Json(json!({ "error": format!("device {id} did not answer within {:?}", svc.config().ping_timeout) })),
        )
            .into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

#[derive(Serialize)]
struct Progress {
    received: usize,
    expected: usize,
}

/// `state` events carry the session snapshot, `progress` events
/// `{"received":k,"expected":n}`. The first event is the current snapshot;
/// the stream ends after a terminal state.
async fn session_events(
    State(svc): State<Svc>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let (snapshot, rx) = svc.watch(&id)?;
    let stream = futures::stream::unfold((Some(snapshot), rx, false), |(first, mut rx, done)| async move {
        if done {
            return None;
        }
        if let Some(s) = first {
            let done = s.state.is_terminal();
            return Some((Ok(state_event(&s)), (None, rx, done)));
        }
        loop {
            match rx.recv().await {
                Ok(SessionEvent::State(s)) => {
                    let done = s.state.is_terminal();
                    return Some((Ok(state_event(&s)), (None, rx, done)));
                }
                Ok(SessionEvent::Progress { received, expected }) => {
                    let ev = Event::default()
                        .event("progress")
                        .data(serde_json::to_string(&Progress { received, expected }).expect("plain struct"));
                    return Some((Ok(ev), (None, rx, false)));
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::debug!("event stream skipped {n} events");
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

fn state_event(s: &Session) -> Event {
    Event::default()
        .event("state")
        .data(serde_json::to_string(s).expect("session serializes"))
}
